//! The extension operator for measures on the sphere, through its action on
//! spherical harmonics, and the dyadic block exponents of the extension
//! estimate.
//!
//! The extension of `Σ a_k Y_k dσ` has angular L² magnitude
//! `G(r) = 2π r^{1−n/2} (Σ|a_k|² J_{k−1+n/2}(2πr)²)^{1/2}`. The block
//! analysis works in the unscaled variable: over `r ∈ [M, 2M]` it integrates
//! `(Σ|a_k|²|J_{k−1+n/2}(r)|²)^{q/2} r^{(1−n/2)q+n−1}`, split by degree into
//! `k < M/2`, `M/2 ≤ k ≤ 4M` and `k > 4M`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j_ladder_ln, jv};
use crate::error::{param, LabError, Result};
use crate::grid::{RadialGrid, RadialProfile};
use crate::planar::linear_fit;
use crate::quad::gauss_legendre;

/// Coefficients `a_k` of one normalized harmonic per degree `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoefficients {
    pub n: u32,
    pub a: Vec<Complex64>,
}

impl HarmonicCoefficients {
    pub fn new(n: u32, a: Vec<Complex64>) -> Result<Self> {
        if n < 2 {
            return param("dimension must be at least 2");
        }
        if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return param("coefficients must be finite");
        }
        Ok(Self { n, a })
    }

    pub fn single(n: u32, k: usize) -> Result<Self> {
        let mut a = vec![Complex64::new(0.0, 0.0); k + 1];
        a[k] = Complex64::new(1.0, 0.0);
        Self::new(n, a)
    }

    pub fn flat(n: u32, k_max: usize) -> Result<Self> {
        Self::new(n, vec![Complex64::new(1.0, 0.0); k_max + 1])
    }

    fn order(&self, k: usize) -> f64 {
        k as f64 - 1.0 + 0.5 * f64::from(self.n)
    }

    /// `G(r)` at one radius.
    pub fn magnitude(&self, r: f64) -> f64 {
        let x = 2.0 * PI * r;
        let s: f64 = self
            .a
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(k, c)| {
                let nu = self.order(k);
                let j = if x == 0.0 { if nu == 0.0 { 1.0 } else { 0.0 } } else { jv(nu, x) };
                c.norm_sqr() * j * j
            })
            .sum();
        if r == 0.0 {
            // r^{1−n/2} J_{n/2−1}(2πr) → π^{n/2−1}/Γ(n/2) at the origin; only
            // n = 2 is finite without the limit and is all that is needed.
            return if self.n == 2 { 2.0 * PI * s.sqrt() } else { f64::NAN };
        }
        2.0 * PI * r.powf(1.0 - 0.5 * f64::from(self.n)) * s.sqrt()
    }
}

/// `G` sampled on a grid of positive radii.
pub fn extension_profile(a: &HarmonicCoefficients, grid: Arc<RadialGrid<f64>>) -> Result<RadialProfile<f64>> {
    if grid.r_min() <= 0.0 && a.n != 2 {
        return param("grid must start at r > 0");
    }
    let vals: Vec<f64> = grid.nodes().par_iter().map(|&r| a.magnitude(r)).collect();
    Ok(RadialProfile::from_real_fn_indexed(grid, |i| vals[i]))
}

/// Gauss–Legendre nodes and weights on `[lo, hi]` with panels of length at
/// most `panel` and `order` points each.
fn panel_nodes(lo: f64, hi: f64, panel: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre::<f64>(order);
    let count = ((hi - lo) / panel).ceil().max(1.0) as usize;
    let h = (hi - lo) / count as f64;
    let mut x = Vec::with_capacity(count * order);
    let mut w = Vec::with_capacity(count * order);
    for p in 0..count {
        let mid = lo + (p as f64 + 0.5) * h;
        for (t, wt) in gx.iter().zip(&gw) {
            x.push(mid + 0.5 * h * t);
            w.push(0.5 * h * wt);
        }
    }
    (x, w)
}

/// `∫_lo^hi G(r)^q r^{n−1} dr` with 8-node panels of length `1/(2·density)`.
pub fn extension_ring_integral(a: &HarmonicCoefficients, q: f64, lo: f64, hi: f64, density: f64) -> f64 {
    let (x, w) = panel_nodes(lo, hi, 0.5 / density, 8);
    let n1 = a.n as i32 - 1;
    // Collected before summing so the result does not depend on scheduling.
    let terms: Vec<f64> = x.par_iter().zip(&w).map(|(&r, &wt)| wt * a.magnitude(r).powf(q) * r.powi(n1)).collect();
    terms.iter().sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionNorm {
    pub value: f64,
    /// Log-log slope of window averages of `G^q r^{n−1}` over `[r_max/10, r_max]`.
    pub tail_slope: f64,
    pub divergent: bool,
}

/// The tail counts as divergent when it decays no faster than `r^{−1−0.01}`.
pub const TAIL_SLOPE_LIMIT: f64 = -1.01;

/// `(∫₀^{r_max} G^q r^{n−1} dr)^{1/q}` with a divergence flag.
///
/// The integrand oscillates through zeros, so the tail slope is fitted to
/// averages over 20 log-spaced windows of the last decade.
pub fn extension_mixed_norm(a: &HarmonicCoefficients, q: f64, r_max: f64) -> Result<ExtensionNorm> {
    if !(q > 2.0) {
        return param("q must exceed 2");
    }
    if !(r_max > 1.0) {
        return param("r_max must exceed 1");
    }
    let lo = if a.n == 2 { 0.0 } else { 1e-9 };
    let total = extension_ring_integral(a, q, lo, r_max, 1.0);
    let windows = 20;
    let edges: Vec<f64> = (0..=windows).map(|i| 0.1 * r_max * 10f64.powf(i as f64 / windows as f64)).collect();
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for e in edges.windows(2) {
        let avg = extension_ring_integral(a, q, e[0], e[1], 1.0) / (e[1] - e[0]);
        if avg > 0.0 {
            lx.push((0.5 * (e[0] + e[1])).ln());
            ly.push(avg.ln());
        }
    }
    let tail_slope = if lx.len() >= 2 { linear_fit(&lx, &ly)?.0 } else { f64::NEG_INFINITY };
    Ok(ExtensionNorm { value: total.powf(1.0 / q), tail_slope, divergent: tail_slope > TAIL_SLOPE_LIMIT })
}

/// How the block coefficients are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientFamily {
    /// `a_k = 1` for `k ≤ k_max`.
    Flat { k_max: usize },
    /// The supremum of `I_M^j / (Σ|a_k|²)^{q/2}` over coefficients supported
    /// in block `j`. For `q ≥ 2` the integrand is convex in `(|a_k|²)`, so the
    /// supremum is attained by a single degree.
    BlockExtremal,
}

/// `ln I_M^1, ln I_M^2, ln I_M^3` and `ln I_M` for one `M` (natural logs;
/// `−∞` for an empty block).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockValues {
    pub m: f64,
    pub ln_blocks: [f64; 3],
    pub ln_total: f64,
}

/// Quadrature density multiplier for the block integrals; panels over
/// `[M, 2M]` have length `π/(4·density)` with 8 nodes.
pub const BLOCK_PANEL: f64 = PI / 4.0;

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn block_of(k: usize, m: f64) -> usize {
    let kf = k as f64;
    if kf < 0.5 * m {
        0
    } else if kf <= 4.0 * m {
        1
    } else {
        2
    }
}

/// Block integrals over `[M, 2M]` in dimension `n` with weight
/// `r^{(1−n/2)q+n−1}`.
pub fn block_values(n: u32, q: f64, m: f64, family: CoefficientFamily, density: f64) -> Result<BlockValues> {
    if n < 2 || !(q > 2.0) || !(m >= 1.0) {
        return param("need n >= 2, q > 2 and M >= 1");
    }
    let nu0 = 0.5 * f64::from(n) - 1.0;
    let weight_exp = (1.0 - 0.5 * f64::from(n)) * q + f64::from(n) - 1.0;
    let k_top = (4.0 * m).floor() as usize + 1;
    let count = match family {
        CoefficientFamily::Flat { k_max } => k_max + 1,
        CoefficientFamily::BlockExtremal => k_top + 1,
    }
    .max(2);
    let (nodes, weights) = panel_nodes(m, 2.0 * m, BLOCK_PANEL / density, 8);
    // Per node: ln of the weighted integrand pieces.
    let per_node: Vec<(f64, Vec<(f64, f64)>)> = nodes
        .par_iter()
        .zip(&weights)
        .map(|(&r, &w)| (w.ln() + weight_exp * r.ln(), bessel_j_ladder_ln(nu0, count, r)))
        .collect();
    match family {
        CoefficientFamily::BlockExtremal => {
            // ln ∫|J_k|^q r^w dr for every k, then the largest per block.
            let mut best = [f64::NEG_INFINITY; 3];
            let mut overall = f64::NEG_INFINITY;
            for k in 0..count {
                let v = log_sum_exp(per_node.iter().map(|(lw, lad)| lw + q * lad[k].0));
                let b = block_of(k, m);
                best[b] = best[b].max(v);
                overall = overall.max(v);
            }
            Ok(BlockValues { m, ln_blocks: best, ln_total: overall })
        }
        CoefficientFamily::Flat { .. } => {
            let mut parts: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
            let mut total = Vec::new();
            for (lw, lad) in &per_node {
                let mut ln_s = [f64::NEG_INFINITY; 3];
                for b in 0..3 {
                    ln_s[b] = log_sum_exp(lad.iter().enumerate().filter(|(k, _)| block_of(*k, m) == b).map(|(_, l)| 2.0 * l.0));
                    parts[b].push(lw + 0.5 * q * ln_s[b]);
                }
                total.push(lw + 0.5 * q * log_sum_exp(ln_s.iter().copied()));
            }
            let ln_blocks = [
                log_sum_exp(parts[0].iter().copied()),
                log_sum_exp(parts[1].iter().copied()),
                log_sum_exp(parts[2].iter().copied()),
            ];
            Ok(BlockValues { m, ln_blocks, ln_total: log_sum_exp(total.into_iter()) })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicBlockReport {
    pub n: u32,
    pub q: f64,
    pub family: CoefficientFamily,
    pub values: Vec<BlockValues>,
    /// Fitted slopes of `ln I_M^j` against `ln M` (`None` if a block is empty).
    pub slopes: [Option<f64>; 3],
    /// The exponents the estimates predict: `(4−q)/2`, `(4−q)/3`, `2−q`.
    pub predicted: [f64; 3],
}

fn fit_ln(ms: &[f64], ln_vals: &[f64]) -> Result<Option<f64>> {
    if ln_vals.iter().any(|v| !v.is_finite()) {
        return Ok(None);
    }
    let lx: Vec<f64> = ms.iter().map(|m| m.ln()).collect();
    Ok(Some(linear_fit(&lx, ln_vals)?.0))
}

/// Block integrals for `n = 2` at each `M`, with fitted exponents.
pub fn dyadic_block_scan(q: f64, ms: &[f64], family: CoefficientFamily, density: f64) -> Result<DyadicBlockReport> {
    if ms.len() < 3 {
        return Err(LabError::Fit("need at least three M values".into()));
    }
    if !(q > 4.0) {
        return param("block scan needs q > 4");
    }
    let values: Vec<BlockValues> = ms.iter().map(|&m| block_values(2, q, m, family, density)).collect::<Result<_>>()?;
    let mut slopes = [None; 3];
    for (b, slot) in slopes.iter_mut().enumerate() {
        let ln: Vec<f64> = values.iter().map(|v| v.ln_blocks[b]).collect();
        *slot = fit_ln(ms, &ln)?;
    }
    Ok(DyadicBlockReport {
        n: 2,
        q,
        family,
        values,
        slopes,
        predicted: [(4.0 - q) / 2.0, (4.0 - q) / 3.0, 2.0 - q],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralBlockFit {
    pub n: u32,
    pub q: f64,
    pub values: Vec<BlockValues>,
    pub slope: f64,
    /// `(n−2)(1−q/2) + max((4−q)/2, (4−q)/3, 2−q)`.
    pub predicted: f64,
}

/// Fitted exponent of the whole block `I_M` in dimension `n`.
pub fn general_dimension_block(n: u32, q: f64, ms: &[f64], family: CoefficientFamily, density: f64) -> Result<GeneralBlockFit> {
    if ms.len() < 3 {
        return Err(LabError::Fit("need at least three M values".into()));
    }
    let values: Vec<BlockValues> = ms.iter().map(|&m| block_values(n, q, m, family, density)).collect::<Result<_>>()?;
    let ln: Vec<f64> = values.iter().map(|v| v.ln_total).collect();
    let slope = fit_ln(ms, &ln)?.ok_or_else(|| LabError::Fit("empty block".into()))?;
    let nf = f64::from(n);
    let predicted = (nf - 2.0) * (1.0 - 0.5 * q) + ((4.0 - q) / 2.0).max((4.0 - q) / 3.0).max(2.0 - q);
    Ok(GeneralBlockFit { n, q, values, slope, predicted })
}

/// The transition bins `[M/2 + αM^{1/3}, M/2 + (α+1)M^{1/3}]`,
/// `α = 0..⌊3M^{2/3}/2⌋`, used to group degrees `k` near the turning point.
pub fn transition_bins(m: f64) -> Vec<(f64, f64)> {
    let w = m.cbrt();
    let count = (1.5 * m.powf(2.0 / 3.0) + 1e-9).floor() as usize;
    (0..=count).map(|a| (0.5 * m + a as f64 * w, 0.5 * m + (a as f64 + 1.0) * w)).collect()
}

/// `A_α = Σ_{k ∈ G_α} |a_k|²` for each transition bin.
pub fn bin_masses(a: &HarmonicCoefficients, m: f64) -> Vec<f64> {
    transition_bins(m)
        .iter()
        .map(|&(lo, hi)| {
            a.a.iter()
                .enumerate()
                .filter(|(k, _)| (*k as f64) >= lo && (*k as f64) < hi)
                .map(|(_, c)| c.norm_sqr())
                .sum()
        })
        .collect()
}

pub fn write_block_csv<W: Write>(report: &DyadicBlockReport, mut w: W) -> Result<()> {
    writeln!(w, "n,q,M,block,value")?;
    for v in &report.values {
        for (b, l) in v.ln_blocks.iter().enumerate() {
            writeln!(w, "{},{},{},I{},{:.12e}", report.n, report.q, v.m, b + 1, l.exp())?;
        }
        writeln!(w, "{},{},{},total,{:.12e}", report.n, report.q, v.m, v.ln_total.exp())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_vanishes_at_the_first_zero() {
        let a = HarmonicCoefficients::single(2, 0).unwrap();
        let r0 = 2.404825557695773 / (2.0 * PI);
        assert!(a.magnitude(r0).abs() < 1e-8);
        let zero = HarmonicCoefficients::new(2, vec![Complex64::new(0.0, 0.0); 3]).unwrap();
        assert_eq!(zero.magnitude(0.7), 0.0);
        let scaled = HarmonicCoefficients::new(2, vec![Complex64::new(0.0, 3.0)]).unwrap();
        assert!((scaled.magnitude(0.7) - 3.0 * a.magnitude(0.7)).abs() < 1e-13);
    }

    #[test]
    fn ring_integral_at_q2_matches_direct_quadrature() {
        let a = HarmonicCoefficients::single(3, 2).unwrap();
        let got = extension_ring_integral(&a, 2.0, 4.0, 8.0, 1.0);
        // Independent fine trapezoid rule of 4π²|J_ν(2πr)|² r^{2−n} r^{n−1}.
        let nu = 2.5;
        let steps = 200_000;
        let h = 4.0 / steps as f64;
        let f = |r: f64| 4.0 * PI * PI * jv(nu, 2.0 * PI * r).powi(2) * r;
        let mut direct = 0.5 * (f(4.0) + f(8.0));
        for i in 1..steps {
            direct += f(4.0 + i as f64 * h);
        }
        direct *= h;
        assert!((got - direct).abs() < 1e-6 * direct);
    }

    #[test]
    fn flat_blocks_partition_the_total() {
        let v = block_values(2, 6.0, 16.0, CoefficientFamily::Flat { k_max: 80 }, 1.0).unwrap();
        // The total is not the sum of sub-block integrals, but recombining the
        // sub-block sums before exponentiation must reproduce it; with one
        // nonempty block they coincide.
        let only_low = block_values(2, 6.0, 16.0, CoefficientFamily::Flat { k_max: 7 }, 1.0).unwrap();
        assert!((only_low.ln_total - only_low.ln_blocks[0]).abs() < 1e-10);
        assert!(v.ln_total >= v.ln_blocks.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn extremal_blocks_dominate_flat_normalized_blocks() {
        let m = 8.0;
        let ext = block_values(2, 6.0, m, CoefficientFamily::BlockExtremal, 1.0).unwrap();
        let flat = block_values(2, 6.0, m, CoefficientFamily::Flat { k_max: 3 }, 1.0).unwrap();
        // Flat on k ≤ 3 has Σ|a|² = 4, all in the low block.
        assert!(flat.ln_blocks[0] - 3.0 * 4f64.ln() <= ext.ln_blocks[0] + 1e-12);
    }

    #[test]
    fn scan_needs_three_values() {
        assert!(dyadic_block_scan(6.0, &[32.0, 64.0], CoefficientFamily::BlockExtremal, 1.0).is_err());
    }

    #[test]
    fn bins_cover_the_transition() {
        let bins = transition_bins(64.0);
        assert_eq!(bins.len(), 25);
        assert!((bins[0].0 - 32.0).abs() < 1e-12);
        let a = HarmonicCoefficients::flat(2, 300).unwrap();
        let masses = bin_masses(&a, 64.0);
        assert!(masses.iter().all(|&m| m >= 3.0));
    }
}
