//! A_p characteristics of one-dimensional weights and the `(Mω^s)^{1/s}`
//! construction of A_1 weights.
//!
//! Weights are sampled at the midpoints of equal cells of `[−X, X]`, so an
//! even cell count keeps `x = 0` off the sample set. Suprema run over every
//! interval that is a union of consecutive cells.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::maximal::hl_max_1d_all;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSamples<T: Real> {
    pub x_max: T,
    pub points: Vec<T>,
    pub values: Vec<T>,
    /// The power `s` when the weight was built as `(Mω^s)^{1/s}`.
    pub s: Option<T>,
}

impl<T: Real> WeightSamples<T> {
    /// Midpoint samples of `f` on `cells` equal cells of `[−x_max, x_max]`.
    /// Values must be finite and nonnegative; A_p computations further
    /// require them positive.
    pub fn from_fn(x_max: T, cells: usize, f: impl Fn(T) -> T) -> Result<Self> {
        if cells < 2 || !(x_max > T::zero()) {
            return param("need at least two cells on a nondegenerate interval");
        }
        let h = (x_max + x_max) / T::from_usize_lossy(cells);
        let points: Vec<T> =
            (0..cells).map(|i| -x_max + (T::from_usize_lossy(i) + T::lit(0.5)) * h).collect();
        let values: Vec<T> = points.iter().map(|&x| f(x)).collect();
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return param("weight samples must be finite and nonnegative");
        }
        Ok(Self { x_max, points, values, s: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { x_max: self.x_max, points: self.points.clone(), values: self.values.iter().map(|&v| f(v)).collect(), s: self.s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub p: f64,
    pub characteristic: f64,
    /// Maximizing interval, as `[left, right]` endpoints in `x`.
    pub interval: (f64, f64),
    /// Characteristic at each refinement level (one entry for fixed samples).
    pub trace: Vec<f64>,
}

fn prefix<T: Real>(v: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len() + 1);
    let mut acc = T::zero();
    out.push(acc);
    for &x in v {
        acc += x;
        out.push(acc);
    }
    out
}

/// `sup_I (avg_I ω)(avg_I ω^{−1/(p−1)})^{p−1}` over all cell intervals.
pub fn ap_characteristic<T: Real>(w: &WeightSamples<T>, p: T) -> Result<ApResult> {
    if !(p > T::one()) {
        return param("p must exceed 1");
    }
    if w.values.iter().any(|&v| !(v > T::zero())) {
        return param("A_p needs strictly positive weight samples");
    }
    let e = -(T::one() / (p - T::one()));
    let dual: Vec<T> = w.values.iter().map(|&v| v.powf(e)).collect();
    let (sw, sd) = (prefix(&w.values), prefix(&dual));
    let n = w.len();
    let q = p - T::one();
    let unit_q = q == T::one();
    let mut best = T::neg_infinity();
    let mut arg = (0, 0);
    for a in 0..n {
        for b in a..n {
            let len = T::from_usize_lossy(b - a + 1);
            let aw = (sw[b + 1] - sw[a]) / len;
            let ad = (sd[b + 1] - sd[a]) / len;
            let v = if unit_q { aw * ad } else { aw * ad.powf(q) };
            if v > best {
                best = v;
                arg = (a, b);
            }
        }
    }
    // Jensen gives at least 1 on every interval; only rounding can dip below.
    let best = best.max(T::one());
    let h = (w.x_max + w.x_max).f64() / n as f64;
    let left = -w.x_max.f64() + arg.0 as f64 * h;
    Ok(ApResult {
        p: p.f64(),
        characteristic: best.f64(),
        interval: (left, left + (arg.1 - arg.0 + 1) as f64 * h),
        trace: vec![best.f64()],
    })
}

/// [`ap_characteristic`] of `f` sampled with `base_cells · factor^k` cells,
/// `k = 0..levels`; the result carries the finest value and the trace.
pub fn ap_refinement(
    f: impl Fn(f64) -> f64,
    x_max: f64,
    base_cells: usize,
    factor: usize,
    levels: usize,
    p: f64,
) -> Result<ApResult> {
    let mut trace = Vec::with_capacity(levels);
    let mut last = None;
    let mut cells = base_cells;
    for _ in 0..levels {
        let r = ap_characteristic(&WeightSamples::from_fn(x_max, cells, &f)?, p)?;
        trace.push(r.characteristic);
        last = Some(r);
        cells *= factor;
    }
    let mut r = last.ok_or_else(|| crate::LabError::Parameter("need at least one level".into()))?;
    r.trace = trace;
    Ok(r)
}

/// `(M(ω^s))^{1/s}` pointwise on the same samples.
pub fn a1_construct<T: Real>(w: &WeightSamples<T>, s: T) -> Result<WeightSamples<T>> {
    if !(s > T::one()) {
        return param("s must exceed 1");
    }
    let powered: Vec<T> = w.values.iter().map(|&v| v.powf(s)).collect();
    let inv = T::one() / s;
    let values = hl_max_1d_all(&powered).into_iter().map(|m| m.powf(inv)).collect();
    Ok(WeightSamples { x_max: w.x_max, points: w.points.clone(), values, s: Some(s) })
}

/// `sup M(W)/W` with `W = (Mω^s)^{1/s}`, for `f` sampled with
/// `base_cells · 2^k` cells, `k = 0..levels`.
pub fn a1_lemma_check(f: impl Fn(f64) -> f64, x_max: f64, s: f64, base_cells: usize, levels: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(levels);
    let mut cells = base_cells;
    for _ in 0..levels {
        let w = a1_construct(&WeightSamples::from_fn(x_max, cells, &f)?, s)?;
        let mw = hl_max_1d_all(&w.values);
        let ratio = mw.iter().zip(&w.values).map(|(m, v)| m / v).fold(0.0, f64::max);
        out.push(ratio);
        cells *= 2;
    }
    Ok(out)
}

/// A positive step function on `[−x_max, x_max]` with `steps` equal pieces
/// and values drawn uniformly from `[0.1, 10]`.
pub fn random_step_weight(seed: u64, steps: usize, x_max: f64) -> impl Fn(f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..steps).map(|_| rng.gen_range(0.1..10.0)).collect();
    move |x: f64| {
        let t = ((x + x_max) / (2.0 * x_max) * steps as f64).floor();
        vals[(t.max(0.0) as usize).min(steps - 1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightClass {
    Stable,
    Divergent,
}

/// Growth per refinement level at or above which a characteristic diverges.
pub const GROWTH_THRESHOLD: f64 = 1.5;
/// Ratio of successive increments at or above which the growth is not
/// settling (logarithmic divergence keeps constant increments).
pub const INCREMENT_RATIO_THRESHOLD: f64 = 0.9;

/// Classifies a refinement trace.
pub fn classify_trace(trace: &[f64]) -> WeightClass {
    let growth = trace.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    if growth >= GROWTH_THRESHOLD {
        return WeightClass::Divergent;
    }
    if trace.len() >= 3 {
        let m = trace.len();
        let (d1, d2) = (trace[m - 2] - trace[m - 3], trace[m - 1] - trace[m - 2]);
        if d1 > 1e-9 * trace[m - 3] && d2 / d1 >= INCREMENT_RATIO_THRESHOLD {
            return WeightClass::Divergent;
        }
    }
    WeightClass::Stable
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub alpha: f64,
    pub s: f64,
    pub x: f64,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Lower bound for `(M(|·|^{sα}))^{1/s}(x)`, `x > 0`, from exact averages of
/// `|y|^β` over a grid of intervals `[a, b] ∋ x` inside `[−x_max, x_max]`
/// (the grid includes `[0, x]`), compared with
/// `(1/(1+sα))^{1/s}|x|^α` and `(2/(1+sα))^{1/s}|x|^α`.
pub fn sandwich_check(alpha: f64, s: f64, x: f64, x_max: f64, grid: usize) -> Result<SandwichCheck> {
    let beta = s * alpha;
    if !(alpha > -1.0 && alpha <= 0.0 && beta > -1.0 && x > 0.0 && x < x_max && s > 1.0) {
        return param("sandwich needs -1 < alpha <= 0, s*alpha > -1, s > 1 and 0 < x < x_max");
    }
    let anti = |y: f64| y.signum() * y.abs().powf(beta + 1.0) / (beta + 1.0);
    let mut best: f64 = 0.0;
    for i in 0..=grid {
        let a = -x_max + (x + x_max) * i as f64 / grid as f64;
        for j in 0..=grid {
            let b = x + (x_max - x) * j as f64 / grid as f64;
            if b > a {
                best = best.max((anti(b) - anti(a)) / (b - a));
            }
        }
    }
    let value = best.powf(1.0 / s);
    let base = x.powf(alpha);
    let lower = (1.0 / (1.0 + beta)).powf(1.0 / s) * base;
    let upper = (2.0 / (1.0 + beta)).powf(1.0 / s) * base;
    let tol = 1e-12 * upper;
    Ok(SandwichCheck { alpha, s, x, lower, value, upper, holds: lower <= value + tol && value <= upper + tol })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerWeightRow {
    pub alpha: f64,
    pub p: f64,
    /// `(cells, characteristic)` per level.
    pub levels: Vec<(usize, f64)>,
    pub classification: WeightClass,
    pub sandwich: Vec<SandwichCheck>,
}

/// Points at which the sandwich inequality is sampled.
pub const SANDWICH_POINTS: [f64; 4] = [0.05, 0.25, 0.5, 0.75];

/// `|x|^α` on `[−1, 1]` at 1024, 2048 and 4096 cells, classified by
/// [`classify_trace`]; for `−1 < α ≤ 0` with `sα > −1` the sandwich is
/// checked at [`SANDWICH_POINTS`].
pub fn power_weight_range_scan(p: f64, alphas: &[f64], s: f64) -> Result<Vec<PowerWeightRow>> {
    alphas
        .iter()
        .map(|&alpha| {
            let res = ap_refinement(|x: f64| x.abs().powf(alpha), 1.0, 1024, 2, 3, p)?;
            let levels = res.trace.iter().enumerate().map(|(k, &c)| (1024 << k, c)).collect();
            let sandwich = if alpha > -1.0 && alpha <= 0.0 && s * alpha > -1.0 {
                SANDWICH_POINTS
                    .iter()
                    .map(|&x| sandwich_check(alpha, s, x, 1.0, 400))
                    .collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            Ok(PowerWeightRow { alpha, p, levels, classification: classify_trace(&res.trace), sandwich })
        })
        .collect()
}

pub fn write_power_weight_csv<W: Write>(rows: &[PowerWeightRow], mut w: W) -> Result<()> {
    writeln!(w, "alpha,p,level,nodes,characteristic,classification")?;
    for r in rows {
        let class = match r.classification {
            WeightClass::Stable => "stable",
            WeightClass::Divergent => "divergent",
        };
        for (k, (cells, c)) in r.levels.iter().enumerate() {
            writeln!(w, "{},{},{},{},{:.12e},{}", r.alpha, r.p, k, cells, c, class)?;
        }
    }
    Ok(())
}
