use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use disclab::suite::{compare_reports, read_report, run_suite, ExperimentConfig, Status, SUITES};
use disclab::{LabError, Result};

#[derive(Parser)]
#[command(name = "disclab", about = "Numerical lab for the disc multiplier in mixed-norm spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite and write report.json plus CSV data into the output directory.
    Run {
        /// One of: bessel-check, kernel-norms, disc-apply, planar-lab, kakeya,
        /// tubes, weights, restriction, all.
        suite: String,
        /// Flat JSON config; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Orders for the envelope scan as a dyadic range, e.g. `8..512`.
        #[arg(long)]
        nu: Option<String>,
        #[arg(long, default_value = "disclab-out")]
        out: PathBuf,
    },
    /// Compare two reports of the same suite and config.
    Compare { baseline: PathBuf, current: PathBuf },
}

fn parse_dyadic(spec: &str) -> Result<Vec<f64>> {
    let bad = || LabError::Parse(format!("expected a dyadic range like 8..512, got '{spec}'"));
    let (a, b) = spec.split_once("..").ok_or_else(bad)?;
    let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a == 0 || !a.is_power_of_two() || !b.is_power_of_two() || b < a {
        return Err(bad());
    }
    Ok(std::iter::successors(Some(a), |&v| (v < b).then_some(2 * v)).map(|v| v as f64).collect())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { suite, config, seed, nu, out } => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(LabError::Parameter(format!("unknown suite '{suite}'; expected one of {}", SUITES.join(", "))));
            }
            let mut cfg = match config {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(spec) = nu {
                cfg.vdc_nu = parse_dyadic(&spec)?;
            }
            let report = run_suite(&suite, &cfg, &out)?;
            for c in &report.checks {
                let status = match c.status {
                    Status::Pass => "PASS",
                    Status::Fail => "FAIL",
                    Status::Info => "INFO",
                };
                let observed = c.observed.map_or("non-finite".to_string(), |v| format!("{v:.6e}"));
                println!("{status} {} observed={observed}", c.id);
            }
            println!(
                "{} checks, {} failed, {:.1}s; report in {}",
                report.checks.len(),
                report.failures(),
                report.runtime_seconds.unwrap_or(0.0),
                out.join("report.json").display()
            );
            Ok(report.failures() == 0)
        }
        Command::Compare { baseline, current } => {
            let summary = compare_reports(&read_report(&baseline)?, &read_report(&current)?)?;
            for d in summary.drifts.iter().filter(|d| d.flagged) {
                println!("DRIFT {} baseline={:?} current={:?} relative={:.3e}", d.id, d.baseline, d.current, d.relative);
            }
            for id in &summary.structural {
                println!("MISSING {id}");
            }
            println!("{} checks compared, clean: {}", summary.drifts.len(), summary.is_clean());
            Ok(summary.is_clean())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
