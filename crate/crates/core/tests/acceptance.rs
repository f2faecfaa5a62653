//! Acceptance gate: runs the full suite twice with seed 7 and prints one
//! PASS/FAIL line per criterion. Criteria that fail are reported, not
//! asserted; the test only fails if a suite cannot run at all.

use std::fs;
use std::io::Write;
use std::path::Path;

use disclab::suite::{run_suite, ExperimentConfig, Status, SuiteReport};

const CRITERIA: [&str; 13] = [
    "Bessel accuracy against the oracle set",
    "half-order kernel against its elementary form",
    "radial disc operator against the planar FFT multiplier",
    "projection property of the radial operator",
    "envelope-scan stability and oscillatory amplitude",
    "product integral: bounded at p=2, increasing at p=4",
    "critical-block norm estimates uniform in the order",
    "cube decay slope and partial-integral behaviour",
    "radial Kakeya maximal function",
    "tube overlap exponents, sphere constants, thin shell",
    "A_p characteristics, A_1 construction, sandwich",
    "restriction block exponents and extension norms",
    "byte-identical reports for a fixed seed",
];

fn outputs_identical(a: &Path, b: &Path) -> (bool, Vec<String>) {
    let mut differing = Vec::new();
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        if name == "timing.json" {
            continue;
        }
        let left = fs::read(a.join(&name)).unwrap();
        if fs::read(b.join(&name)).ok().as_deref() != Some(left.as_slice()) {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    (differing.is_empty(), differing)
}

/// Writes past the test harness's output capture so the lines land in logs.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").unwrap();
    out.flush().unwrap();
}

fn line(index: usize, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    emit(&format!("{status} criterion {:2}: {} ({detail})", index + 1, CRITERIA[index]));
}

fn describe_failures(report: &SuiteReport, prefix: &str) -> String {
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| c.id.starts_with(prefix) && c.status == Status::Fail)
        .map(|c| format!("{} observed {}", c.id, c.observed.map_or("non-finite".into(), |v| format!("{v:.4e}"))))
        .collect();
    if failed.is_empty() {
        "all parts pass".into()
    } else {
        failed.join("; ")
    }
}

#[test]
fn acceptance() {
    let cfg = ExperimentConfig { seed: 7, ..ExperimentConfig::default() };
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let report = run_suite("all", &cfg, first.path()).expect("full suite runs");
    let again = run_suite("all", &cfg, second.path()).expect("full suite runs twice");

    let mut passed = 0;
    for i in 0..12 {
        let id = format!("c{:02}", i + 1);
        let summary = report.check(&id).unwrap_or_else(|| panic!("report lacks {id}"));
        let pass = summary.status == Status::Pass;
        passed += usize::from(pass);
        line(i, pass, &describe_failures(&report, &format!("{id}.")));
    }
    let (same, differing) = outputs_identical(first.path(), second.path());
    let same = same && report.checks == again.checks;
    passed += usize::from(same);
    line(12, same, &if same { "all outputs equal".to_string() } else { format!("differ: {}", differing.join(", ")) });
    emit(&format!(
        "{passed}/13 criteria pass; full suite {:.0}s and {:.0}s",
        report.runtime_seconds.unwrap_or(0.0),
        again.runtime_seconds.unwrap_or(0.0)
    ));
}
