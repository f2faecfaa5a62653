//! Named experiment suites, their reports, and report comparison.
//!
//! Every acceptance criterion owns one summary check `cNN`, whose status is
//! the conjunction of its parts `cNN.*`. Reports are ordered by check id and
//! carry no wall-clock data, so a fixed seed and config reproduce them byte
//! for byte; timings go to a separate `timing.json`.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bessel::{self, bessel_j, bessel_j_integral, prodj_integrals, vdc_scan, BesselQuery};
use crate::error::{LabError, Result};
use crate::grid::{RadialGrid, RadialProfile};
use crate::kernels::{self, disc_cross_error, kernel_k, kj_uniformity_scan, projection_defect, CriticalBlock};
use crate::maximal::{self, kakeya_lp_scan, sharpness_profile, universal_kakeya_radial, MaximalQuery};
use crate::planar::cube_decay_experiment;
use crate::restriction::{self, dyadic_block_scan, extension_mixed_norm, general_dimension_block, CoefficientFamily, HarmonicCoefficients};
use crate::tubes::{fit_overlap_tail, generate_brush, rasterize, sphere_overlap_constants, thin_shell_2d, ShellSpec};
use crate::weights::{self, a1_lemma_check, ap_characteristic, ap_refinement, power_weight_range_scan, random_step_weight, WeightClass, WeightSamples};

pub const SUITES: [&str; 9] =
    ["bessel-check", "kernel-norms", "disc-apply", "planar-lab", "kakeya", "tubes", "weights", "restriction", "all"];

/// Every numeric parameter of every suite. Missing fields take the defaults,
/// and the complete config is written back into each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub vdc_nu: Vec<f64>,
    pub vdc_samples: usize,
    pub prodj_nu: Vec<f64>,
    pub kernel_points: usize,
    pub kj_nu: Vec<f64>,
    pub kj_p: f64,
    pub disc_n: usize,
    pub disc_l: f64,
    pub disc_degrees: Vec<u32>,
    pub disc_sigma: f64,
    pub disc_h: f64,
    pub projection_r_max: Vec<f64>,
    pub projection_h: f64,
    pub projection_window: f64,
    pub cube_n: usize,
    pub cube_l: f64,
    pub cube_fit: (f64, f64),
    pub kakeya_deltas: Vec<f64>,
    pub kakeya_h: f64,
    pub kakeya_r_max: f64,
    pub tube_eps_2d: f64,
    pub tube_eps_3d: f64,
    pub thin_eps: Vec<f64>,
    pub weight_cells: usize,
    pub weight_trials: usize,
    pub block_q: f64,
    pub block_m: Vec<f64>,
    pub extension_r_max: f64,
}

fn dyadic(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e as i32)).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            vdc_nu: dyadic(3, 9),
            vdc_samples: 200,
            prodj_nu: dyadic(5, 9),
            kernel_points: 100,
            kj_nu: dyadic(4, 9),
            kj_p: 2.0,
            disc_n: 512,
            disc_l: 16.0,
            disc_degrees: vec![0, 1, 4],
            disc_sigma: 1.5,
            disc_h: 0.01,
            projection_r_max: vec![100.0, 200.0],
            projection_h: 0.1,
            projection_window: 25.0,
            cube_n: 2048,
            cube_l: 64.0,
            cube_fit: (4.0, 12.0),
            kakeya_deltas: vec![0.25, 1.0 / 16.0, 1.0 / 64.0],
            kakeya_h: 1.0 / 512.0,
            kakeya_r_max: 4.0,
            tube_eps_2d: 1.0 / 128.0,
            tube_eps_3d: 1.0 / 16.0,
            thin_eps: vec![1.0 / 64.0, 1.0 / 128.0],
            weight_cells: 4096,
            weight_trials: 10,
            block_q: 6.0,
            block_m: dyadic(5, 8),
            extension_r_max: 200.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let lists: [(&str, usize, usize); 7] = [
            ("vdc_nu", self.vdc_nu.len(), 1),
            ("prodj_nu", self.prodj_nu.len(), 2),
            ("kj_nu", self.kj_nu.len(), 1),
            ("disc_degrees", self.disc_degrees.len(), 1),
            ("projection_r_max", self.projection_r_max.len(), 2),
            ("kakeya_deltas", self.kakeya_deltas.len(), 2),
            ("block_m", self.block_m.len(), 3),
        ];
        for (name, len, min) in lists {
            if len < min {
                return Err(LabError::Parameter(format!("{name} needs at least {min} entries")));
            }
        }
        if self.thin_eps.len() != 2 {
            return Err(LabError::Parameter("thin_eps needs exactly two widths".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

/// How `observed` is judged against `expected` and `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `|observed − expected| ≤ tolerance`.
    Within,
    /// `observed ≤ expected`.
    AtMost,
    /// `observed ≥ expected`.
    AtLeast,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    /// `None` when the observation is not a finite number.
    pub observed: Option<f64>,
    pub expected: f64,
    pub tolerance: f64,
    pub rule: Rule,
    pub status: Status,
}

impl Check {
    fn judged(id: impl Into<String>, observed: f64, expected: f64, tolerance: f64, rule: Rule) -> Self {
        let ok = observed.is_finite()
            && match rule {
                Rule::Within => (observed - expected).abs() <= tolerance,
                Rule::AtMost => observed <= expected,
                Rule::AtLeast => observed >= expected,
                Rule::Report => true,
            };
        let status = match rule {
            Rule::Report => Status::Info,
            _ if ok => Status::Pass,
            _ => Status::Fail,
        };
        Self { id: id.into(), observed: observed.is_finite().then_some(observed), expected, tolerance, rule, status }
    }

    pub fn within(id: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        Self::judged(id, observed, expected, tolerance, Rule::Within)
    }

    pub fn at_most(id: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::judged(id, observed, bound, 0.0, Rule::AtMost)
    }

    pub fn at_least(id: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::judged(id, observed, bound, 0.0, Rule::AtLeast)
    }

    pub fn flag(id: impl Into<String>, observed: bool, expected: bool) -> Self {
        Self::within(id, f64::from(u8::from(observed)), f64::from(u8::from(expected)), 0.0)
    }

    pub fn report(id: impl Into<String>, observed: f64) -> Self {
        Self::judged(id, observed, 0.0, 0.0, Rule::Report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    /// Always `null` in written reports; see `timing.json`.
    pub runtime_seconds: Option<f64>,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }

    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut stripped = self.clone();
        stripped.runtime_seconds = None;
        Ok(serde_json::to_string_pretty(&stripped)? + "\n")
    }
}

/// Appends the criterion summary `cNN` for parts already pushed under `cNN.`.
fn summarize(checks: &mut Vec<Check>, criterion: u32) {
    let prefix = format!("c{criterion:02}.");
    let failed = checks.iter().filter(|c| c.id.starts_with(&prefix) && c.status == Status::Fail).count();
    checks.push(Check::at_most(format!("c{criterion:02}"), failed as f64, 0.0));
}

fn csv(out: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn max_over_min(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn rel_change(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs()
}

// ---- bessel-check: criteria 1, 5, 6 ----

fn half_integer_closed_form(nu: f64, x: f64) -> f64 {
    let a = (2.0 / (PI * x)).sqrt();
    let (s, c) = x.sin_cos();
    match (2.0 * nu) as u32 {
        1 => a * s,
        3 => a * (s / x - c),
        _ => a * ((3.0 / (x * x) - 1.0) * s - 3.0 * c / x),
    }
}

fn bessel_check(cfg: &ExperimentConfig, out: &Path, checks: &mut Vec<Check>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = csv(out, "bessel_oracles.csv")?;
    writeln!(w, "oracle,nu,x,value,reference,error")?;
    let mut worst_series: f64 = 0.0;
    for _ in 0..50 {
        let nu: f64 = rng.gen_range(0.0..30.0);
        let x: f64 = rng.gen_range(0.01..20.0);
        let v = bessel_j(BesselQuery::new(nu, x)?).value;
        let reference = bessel_j_integral(nu, x).value;
        worst_series = worst_series.max((v - reference).abs());
        writeln!(w, "series_vs_integral,{nu:.17e},{x:.17e},{v:.17e},{reference:.17e},{:.3e}", (v - reference).abs())?;
    }
    let mut worst_half: f64 = 0.0;
    for nu in [0.5, 1.5, 2.5] {
        for _ in 0..20 {
            let x: f64 = rng.gen_range(0.1..50.0);
            let v = bessel_j(BesselQuery::new(nu, x)?).value;
            let reference = half_integer_closed_form(nu, x);
            worst_half = worst_half.max((v - reference).abs());
            writeln!(w, "half_integer,{nu},{x:.17e},{v:.17e},{reference:.17e},{:.3e}", (v - reference).abs())?;
        }
    }
    let zero = bessel_j(BesselQuery::new(0.0f64, 2.404825557695773)?).value.abs();
    writeln!(w, "j0_zero,0,2.404825557695773,{zero:.17e},0,{zero:.3e}")?;
    w.flush()?;
    checks.push(Check::at_most("c01.series_cross_check", worst_series, 1e-9));
    checks.push(Check::at_most("c01.half_integer", worst_half, 1e-9));
    checks.push(Check::at_most("c01.j0_zero", zero, 1e-9));
    summarize(checks, 1);

    let coarse = vdc_scan(&cfg.vdc_nu, cfg.vdc_samples)?;
    let fine = vdc_scan(&cfg.vdc_nu, 2 * cfg.vdc_samples)?;
    bessel::write_scan_csv(&coarse.rows, csv(out, "vdc_scan.csv")?)?;
    for (a, b) in coarse.regimes.iter().zip(&fine.regimes) {
        checks.push(Check::at_most(format!("c05.refine.{}.j", a.regime), rel_change(a.max_ratio_j, b.max_ratio_j), 0.05));
        checks.push(Check::at_most(format!("c05.refine.{}.jp", a.regime), rel_change(a.max_ratio_jp, b.max_ratio_jp), 0.05));
    }
    checks.push(Check::within("c05.oscillatory_limit", fine.oscillatory_tail, (2.0 / PI).sqrt(), 0.02));
    summarize(checks, 5);

    let mut w = csv(out, "prodj.csv")?;
    writeln!(w, "nu,p,value")?;
    let (mut p2, mut p4) = (Vec::new(), Vec::new());
    for &nu in &cfg.prodj_nu {
        let v = prodj_integrals(nu, &[2.0, 4.0])?;
        writeln!(w, "{nu},2,{:.17e}\n{nu},4,{:.17e}", v[0], v[1])?;
        p2.push(v[0]);
        p4.push(v[1]);
    }
    w.flush()?;
    checks.push(Check::at_most("c06.p2_spread", max_over_min(&p2), 1.5));
    let min_step = p4.windows(2).map(|s| s[1] - s[0]).fold(f64::INFINITY, f64::min);
    checks.push(Check::flag("c06.p4_strictly_increasing", min_step > 0.0, true));
    checks.push(Check::report("c06.p4_min_increase", min_step));
    summarize(checks, 6);
    Ok(())
}

// ---- kernel-norms: criteria 2, 7 ----

fn half_order_kernel(t: f64, r: f64) -> f64 {
    let sinc = |x: f64| if x.abs() < 1e-6 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    (sinc(t - r) - sinc(t + r)) / PI
}

fn kernel_norms(cfg: &ExperimentConfig, out: &Path, checks: &mut Vec<Check>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6b65_726e);
    let near = (cfg.kernel_points / 10).max(1);
    let mut w = csv(out, "kernel_oracle.csv")?;
    writeln!(w, "t,r,value,oracle,error")?;
    let mut worst: f64 = 0.0;
    let mut worst_near: f64 = 0.0;
    for i in 0..cfg.kernel_points {
        let t: f64 = rng.gen_range(0.1..50.0);
        let r = if i < near { (t + rng.gen_range(-1e-4..1e-4)).clamp(0.1, 50.0) } else { rng.gen_range(0.1..50.0) };
        let v = kernel_k(0.5, t, r)?;
        let err = (v - half_order_kernel(t, r)).abs();
        worst = worst.max(err);
        if i < near {
            worst_near = worst_near.max(err);
        }
        writeln!(w, "{t:.17e},{r:.17e},{v:.17e},{:.17e},{err:.3e}", half_order_kernel(t, r))?;
    }
    w.flush()?;
    checks.push(Check::at_most("c02.half_order_all", worst, 1e-8));
    checks.push(Check::at_most("c02.half_order_near_diagonal", worst_near, 1e-8));
    summarize(checks, 2);

    let blocks = [CriticalBlock::CC, CriticalBlock::CInf, CriticalBlock::InfC];
    let rows = kj_uniformity_scan(cfg.kj_p, &cfg.kj_nu, &blocks)?;
    kernels::write_kj_csv(&rows, csv(out, "kj_scan.csv")?)?;
    for block in blocks {
        let v: Vec<f64> = rows.iter().filter(|r| r.block == block).map(|r| r.norm_estimate).collect();
        let id = match block {
            CriticalBlock::CC => "cc",
            CriticalBlock::CInf => "c_inf",
            CriticalBlock::InfC => "inf_c",
        };
        checks.push(Check::at_most(format!("c07.spread.{id}"), max_over_min(&v), 2.0));
    }
    summarize(checks, 7);
    Ok(())
}

// ---- disc-apply: criteria 3, 4 ----

fn disc_apply(cfg: &ExperimentConfig, out: &Path, checks: &mut Vec<Check>) -> Result<()> {
    let mut w = csv(out, "disc_cross.csv")?;
    writeln!(w, "k,n,error")?;
    for &k in &cfg.disc_degrees {
        let coarse = disc_cross_error(cfg.disc_n, cfg.disc_l, k, cfg.disc_sigma, cfg.disc_h)?;
        let fine = disc_cross_error(2 * cfg.disc_n, cfg.disc_l, k, cfg.disc_sigma, cfg.disc_h)?;
        writeln!(w, "{k},{},{coarse:.17e}\n{k},{},{fine:.17e}", cfg.disc_n, 2 * cfg.disc_n)?;
        checks.push(Check::at_most(format!("c03.k{k}.error"), coarse, 1e-2));
        checks.push(Check::at_most(format!("c03.k{k}.refined_over_coarse"), fine / coarse, 1.0));
    }
    w.flush()?;
    summarize(checks, 3);

    let profiles: [(&str, fn(f64) -> f64); 2] =
        [("gaussian", |r| (-r * r / 8.0).exp()), ("step", |r| if r <= 3.0 { 1.0 } else { 0.0 })];
    let mut w = csv(out, "projection.csv")?;
    writeln!(w, "profile,k,r_max,defect")?;
    for (name, g) in profiles {
        for k in [0u32, 3] {
            let defects: Vec<f64> = cfg
                .projection_r_max
                .iter()
                .map(|&rm| projection_defect(2, k, g, rm, cfg.projection_h, cfg.projection_window))
                .collect::<Result<_>>()?;
            for (rm, d) in cfg.projection_r_max.iter().zip(&defects) {
                writeln!(w, "{name},{k},{rm},{d:.17e}")?;
            }
            let last = defects[defects.len() - 1];
            checks.push(Check::at_most(format!("c04.{name}.k{k}.defect"), last, 0.05));
            let halving = defects.windows(2).map(|s| s[1] / s[0]).fold(0.0, f64::max);
            checks.push(Check::within(format!("c04.{name}.k{k}.refinement_ratio"), halving, 0.5, 0.1));
        }
    }
    w.flush()?;
    summarize(checks, 4);
    Ok(())
}

// ---- planar-lab: criterion 8 ----

fn planar_lab(cfg: &ExperimentConfig, out: &Path, checks: &mut Vec<Check>) -> Result<()> {
    let res = cube_decay_experiment(cfg.cube_n, cfg.cube_l, cfg.cube_fit, &[4.0 / 3.0, 2.0])?;
    let mut w = csv(out, "cube_partials.csv")?;
    writeln!(w, "p,R,partial")?;
    for part in &res.partials {
        for (r, v) in part.radii.iter().zip(&part.values) {
            writeln!(w, "{},{r},{v:.17e}", part.p)?;
        }
    }
    w.flush()?;
    checks.push(Check::within("c08.slope", res.slope.unwrap_or(f64::NAN), -1.5, 0.1));
    checks.push(Check::report("c08.aliasing", res.aliasing));
    let (low, high) = (&res.partials[0], &res.partials[1]);
    checks.push(Check::flag("c08.p4_3_diverges", low.diverges, true));
    checks.push(Check::flag("c08.p2_converges", !high.diverges, true));
    checks.push(Check::at_most("c08.p2_tail_fraction", high.tail_fraction, 0.05));
    summarize(checks, 8);
    Ok(())
}

// ---- kakeya: criterion 9 ----

fn kakeya(cfg: &ExperimentConfig, out: &Path, checks: &mut Vec<Check>) -> Result<()> {
    let count = (cfg.kakeya_r_max / cfg.kakeya_h).round() as usize + 1;
    let grid = Arc::new(RadialGrid::uniform(0.0, cfg.kakeya_r_max, count)?);
    let chi = RadialProfile::from_real_fn(grid, |r| if r <= 1.0 { 1.0 } else { 0.0 });
    let u = universal_kakeya_radial(&MaximalQuery::new(chi, 2.0, maximal::DEFAULT_RESOLUTION)?);
    checks.push(Check::within("c09.indicator_at_2", u, 2.0 / 3.0, 1e-3));

    let mut rows = Vec::new();
    for p in [3.0, 1.8] {
        let family: Vec<(f64, RadialProfile<f64>)> = cfg
            .kakeya_deltas
            .iter()
            .map(|&d| Ok((d, sharpness_profile(d, p, 2, cfg.kakeya_r_max, cfg.kakeya_h)?)))
            .collect::<Result<_>>()?;
        rows.extend(kakeya_lp_scan(&family, p, 2, maximal::DEFAULT_RESOLUTION)?);
    }
    maximal::write_kakeya_csv(&rows, csv(out, "kakeya_scan.csv")?)?;
    let ratios = |p: f64| -> Vec<f64> {
        rows.iter().filter(|r| r.p == p).map(|r| r.ratio.unwrap_or(f64::NAN)).collect()
    };
    checks.push(Check::at_most("c09.p3_spread", max_over_min(&ratios(3.0)), 2.0));
    let low = ratios(1.8);
    checks.push(Check::at_least("c09.p1_8_growth", low[low.len() - 1] / low[0], 2.0));
    summarize(checks, 9);
    Ok(())
}

// ---- tubes: criterion 10 ----

fn shell_radii() -> Vec<f64> {
    (0..6).map(|k| 1.05 + 0.18 * f64::from(k)).collect()
}

fn tube_case(n: usize, eps: f64, out: &Path, checks: &mut Vec<Check>) -> Result<()> {
    let spec = ShellSpec::new(n, 1.0, 1.0, 1.0, eps)?;
    let tubes = generate_brush(&spec)?;
    let raster = rasterize(&tubes, eps / 4.0)?;
    let hist = raster.histogram();
    hist.write_csv(csv(out, &format!("overlap_{n}d.csv"))?)?;
    let fit = fit_overlap_tail(&hist)?;
    let target = if n == 2 { -2.0 } else { -1.5 };
    checks.push(Check::within(format!("c10.exponent_{n}d"), fit.slope, target, 0.3));
    drop(raster);

    let spec = ShellSpec::new(n, 1.0, 1.0, 0.5, eps)?;
    let raster = rasterize(&generate_brush(&spec)?, eps / 4.0)?;
    let consts = sphere_overlap_constants(&raster, &spec, &shell_radii());
    let mut w = csv(out, &format!("sphere_constants_{n}d.csv"))?;
    writeln!(w, "r,max_overlap,constant")?;
    for (r, m, c) in &consts {
        writeln!(w, "{r},{m},{c:.17e}")?;
    }
    w.flush()?;
    let c: Vec<f64> = consts.iter().map(|t| t.2).collect();
    checks.push(Check::at_most(format!("c10.sphere_spread_{n}d"), max_over_min(&c), 2.0));
    Ok(())
}

fn tubes_suite(cfg: &ExperimentConfig, out: &Path, checks: &mut Vec<Check>) -> Result<()> {
    tube_case(2, cfg.tube_eps_2d, out, checks)?;
    tube_case(3, cfg.tube_eps_3d, out, checks)?;
    let mut w = csv(out, "thin_shell.csv")?;
    writeln!(w, "eps,max_ratio")?;
    let mut maxima = Vec::new();
    for &eps in &cfg.thin_eps {
        let rep = thin_shell_2d(&ShellSpec::new(2, 8.0, 1.0, 8.0, eps)?, eps / 4.0)?;
        writeln!(w, "{eps},{:.17e}", rep.max_ratio)?;
        maxima.push(rep.max_ratio);
    }
    w.flush()?;
    checks.push(Check::at_most("c10.thin_shell_change", rel_change(maxima[0], maxima[1]), 0.3));
    summarize(checks, 10);
    Ok(())
}

// ---- weights: criterion 11 ----

fn weights_suite(cfg: &ExperimentConfig, out: &Path, checks: &mut Vec<Check>) -> Result<()> {
    let one = ap_characteristic(&WeightSamples::from_fn(1.0, cfg.weight_cells, |_| 1.0)?, 2.0)?;
    checks.push(Check::within("c11.constant_weight", one.characteristic, 1.0, 0.0));

    let sqrt = ap_refinement(|x: f64| x.abs().sqrt(), 1.0, cfg.weight_cells, 2, 2, 2.0)?;
    checks.push(Check::at_most("c11.sqrt_refinement_change", rel_change(sqrt.trace[0], sqrt.trace[1]), 0.05));
    let lin = ap_refinement(|x: f64| x.abs(), 1.0, cfg.weight_cells / 4, 4, 3, 2.0)?;
    let growth = lin.trace.windows(2).map(|s| s[1] / s[0]).fold(f64::INFINITY, f64::min);
    checks.push(Check::at_least("c11.linear_growth_per_4x", growth, 2.0));

    let chi = a1_lemma_check(|x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }, 4.0, 2.0, 512, 3)?;
    let chi_change = chi.windows(2).map(|s| rel_change(s[0], s[1])).fold(0.0, f64::max);
    checks.push(Check::at_most("c11.a1_indicator_change", chi_change, 0.1));
    let mut step_change: f64 = 0.0;
    for trial in 0..cfg.weight_trials as u64 {
        let f = random_step_weight(cfg.seed.wrapping_add(trial), 16, 4.0);
        let r = a1_lemma_check(&f, 4.0, 4.0 / 3.0, 512, 2)?;
        step_change = step_change.max(rel_change(r[0], r[1]));
    }
    checks.push(Check::at_most("c11.a1_random_steps_change", step_change, 0.1));

    let alphas = [-1.1, -0.5, 0.0, 0.5, 1.0, 1.5];
    let rows = power_weight_range_scan(2.0, &alphas, 1.5)?;
    weights::write_power_weight_csv(&rows, csv(out, "power_weights.csv")?)?;
    let violations = rows.iter().flat_map(|r| &r.sandwich).filter(|s| !s.holds).count();
    checks.push(Check::at_most("c11.sandwich_violations", violations as f64, 0.0));
    for row in &rows {
        let expected = if row.alpha > -1.0 && row.alpha < 1.0 { WeightClass::Stable } else { WeightClass::Divergent };
        checks.push(Check::flag(format!("weights.class.alpha{:+.1}", row.alpha), row.classification == expected, true));
    }
    summarize(checks, 11);
    Ok(())
}

// ---- restriction: criterion 12 ----

fn restriction_suite(cfg: &ExperimentConfig, out: &Path, checks: &mut Vec<Check>) -> Result<()> {
    let scan = dyadic_block_scan(cfg.block_q, &cfg.block_m, CoefficientFamily::BlockExtremal, 1.0)?;
    restriction::write_block_csv(&scan, csv(out, "blocks.csv")?)?;
    let tol = [0.15, 0.2, 0.3];
    for (j, name) in ["i1", "i2", "i3"].iter().enumerate() {
        let s = scan.slopes[j].unwrap_or(f64::NAN);
        checks.push(Check::within(format!("c12.slope_{name}"), s, scan.predicted[j], tol[j]));
    }
    let a0 = HarmonicCoefficients::single(2, 0)?;
    let q4 = extension_mixed_norm(&a0, 4.0, cfg.extension_r_max)?;
    checks.push(Check::flag("c12.q4_flagged", q4.divergent, true));
    let q5_half = extension_mixed_norm(&a0, 5.0, 0.5 * cfg.extension_r_max)?;
    let q5 = extension_mixed_norm(&a0, 5.0, cfg.extension_r_max)?;
    checks.push(Check::flag("c12.q5_not_flagged", q5.divergent, false));
    checks.push(Check::at_most("c12.q5_doubling_change", rel_change(q5_half.value, q5.value), 0.05));
    summarize(checks, 12);

    let five = HarmonicCoefficients::flat(2, 4)?;
    checks.push(Check::flag("restriction.q8_five_modes_finite", extension_mixed_norm(&five, 8.0, cfg.extension_r_max)?.divergent, false));
    let n3 = general_dimension_block(3, 4.0, &cfg.block_m, CoefficientFamily::BlockExtremal, 1.0)?;
    checks.push(Check::at_most("restriction.n3_q4_slope", n3.slope, 0.0));
    let n3_low = general_dimension_block(3, 2.9, &cfg.block_m, CoefficientFamily::BlockExtremal, 1.0)?;
    checks.push(Check::report("restriction.n3_q2_9_slope", n3_low.slope));
    Ok(())
}

type SuiteFn = fn(&ExperimentConfig, &Path, &mut Vec<Check>) -> Result<()>;

fn suite_fn(name: &str) -> Option<SuiteFn> {
    Some(match name {
        "bessel-check" => bessel_check,
        "kernel-norms" => kernel_norms,
        "disc-apply" => disc_apply,
        "planar-lab" => planar_lab,
        "kakeya" => kakeya,
        "tubes" => tubes_suite,
        "weights" => weights_suite,
        "restriction" => restriction_suite,
        _ => return None,
    })
}

/// Runs `suite`, writes its CSVs, `report.json` and `timing.json` into
/// `out`, and returns the report with the runtime filled in.
pub fn run_suite(suite: &str, cfg: &ExperimentConfig, out: &Path) -> Result<SuiteReport> {
    cfg.validate()?;
    let names: Vec<&str> = match suite {
        "all" => SUITES[..8].to_vec(),
        s if suite_fn(s).is_some() => vec![s],
        s => return Err(LabError::Parameter(format!("unknown suite '{s}' (expected one of {})", SUITES.join(", ")))),
    };
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut timing = serde_json::Map::new();
    for name in names {
        let t = Instant::now();
        suite_fn(name).expect("listed suite")(cfg, out, &mut checks)?;
        timing.insert(name.to_string(), t.elapsed().as_secs_f64().into());
    }
    checks.sort_by(|a, b| a.id.cmp(&b.id));
    let runtime = start.elapsed().as_secs_f64();
    timing.insert("total".into(), runtime.into());
    let report = SuiteReport { suite: suite.to_string(), config: cfg.clone(), checks, runtime_seconds: Some(runtime) };
    fs::write(out.join("report.json"), report.to_json()?)?;
    fs::write(out.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
    Ok(report)
}

pub fn read_report(path: &Path) -> Result<SuiteReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub id: String,
    pub baseline: Option<f64>,
    pub current: Option<f64>,
    /// `|current − baseline| / max(|baseline|, 1e-300)`.
    pub relative: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub suite: String,
    pub drifts: Vec<Drift>,
    /// Check ids present in only one of the two reports.
    pub structural: Vec<String>,
}

impl DriftSummary {
    pub fn is_clean(&self) -> bool {
        self.structural.is_empty() && self.drifts.iter().all(|d| !d.flagged)
    }
}

/// Per-check drift between two reports of the same suite and config. A
/// drift is flagged when the absolute change exceeds the check's tolerance
/// (or any change at all for bound checks), or when the status changes.
pub fn compare_reports(baseline: &SuiteReport, current: &SuiteReport) -> Result<DriftSummary> {
    if baseline.suite != current.suite {
        return Err(LabError::Comparison(format!("suites differ: {} vs {}", baseline.suite, current.suite)));
    }
    if baseline.config != current.config {
        return Err(LabError::Comparison("configs differ".into()));
    }
    let mut drifts = Vec::new();
    let mut structural = Vec::new();
    for b in &baseline.checks {
        let Some(c) = current.check(&b.id) else {
            structural.push(b.id.clone());
            continue;
        };
        let (relative, beyond) = match (b.observed, c.observed) {
            (Some(x), Some(y)) => ((y - x).abs() / x.abs().max(1e-300), (y - x).abs() > b.tolerance),
            (None, None) => (0.0, false),
            _ => (f64::INFINITY, true),
        };
        let relative = if relative.is_finite() { relative } else { f64::MAX };
        drifts.push(Drift { id: b.id.clone(), baseline: b.observed, current: c.observed, relative, flagged: beyond || b.status != c.status });
    }
    for c in &current.checks {
        if baseline.check(&c.id).is_none() {
            structural.push(c.id.clone());
        }
    }
    Ok(DriftSummary { suite: baseline.suite.clone(), drifts, structural })
}
