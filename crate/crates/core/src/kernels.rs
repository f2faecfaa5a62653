//! The Bessel kernels `K_ν(t, r) = √(tr) ∫₀¹ J_ν(rs) J_ν(ts) s ds`, their
//! four-piece split, the per-mode disc operators and L^p norm estimates.
//!
//! Sign convention: integrating the Bessel equation gives
//! `(r² − t²) K_ν(t, r) = √(tr) (t J_ν′(t) J_ν(r) − r J_ν′(r) J_ν(t))`, so the
//! closed form carries `r² − t²` in the denominator. With that sign the kernel
//! is positive on the diagonal and the four pieces below sum to it exactly.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::{jv, jv_and_derivative, ln_gamma, BesselQuery};
use crate::error::{param, LabError, Result};
use crate::grid::{weighted_lp_norm, RadialGrid, RadialProfile};
use crate::quad::PanelRule;

/// Relative distance to the diagonal below which [`kernel_k`] integrates.
pub const NEAR_DIAGONAL: f64 = 1e-3;
/// Absolute distance below which assembled operators use the Taylor branch.
pub const TAYLOR_RADIUS: f64 = 1e-4;

fn check_point(t: f64, r: f64) -> Result<()> {
    if !(t > 0.0 && r > 0.0) || !t.is_finite() || !r.is_finite() {
        return param(format!("kernel arguments must be positive (t={t}, r={r})"));
    }
    Ok(())
}

fn check_order(nu: f64) -> Result<()> {
    BesselQuery::new(nu, 0.0).map(|_| ())
}

/// `√(tr) ∫₀¹ J_ν(rs) J_ν(ts) s ds` by Gauss panels of width ≤ π/(2 max(t, r)).
pub fn kernel_k_quadrature(nu: f64, t: f64, r: f64) -> f64 {
    let rule = PanelRule::new(10);
    let panels = (2.0 * t.max(r) / std::f64::consts::PI).ceil() as usize + 2;
    let integral = rule.integrate(0.0, 1.0, panels, |s| jv(nu, r * s) * jv(nu, t * s) * s);
    (t * r).sqrt() * integral
}

fn closed_form(t: f64, jt: f64, dt: f64, r: f64, jr: f64, dr: f64) -> f64 {
    (t * r).sqrt() * (t * dt * jr - r * dr * jt) / (r * r - t * t)
}

/// Third-order expansion of the closed form around `r = t`, using the Bessel
/// equation for the higher derivatives. Exact on the diagonal.
fn near_diagonal(nu: f64, t: f64, a: f64, b: f64, r: f64) -> f64 {
    let nu2 = nu * nu;
    let u2 = -b / t - (1.0 - nu2 / (t * t)) * a;
    let u3 = b / (t * t) - u2 / t - 2.0 * nu2 * a / t.powi(3) - (1.0 - nu2 / (t * t)) * b;
    let c1 = t * b * b + (t * t - nu2) * a * a / t;
    let c2 = 0.5 * (t * b * u2 + a * ((1.0 + nu2 / (t * t)) * a + (t - nu2 / t) * b));
    let c3 = (t * b * u3
        + a * (-2.0 * nu2 / t.powi(3) * a + 2.0 * (1.0 + nu2 / (t * t)) * b + (t - nu2 / t) * u2))
        / 6.0;
    let e = r - t;
    (t * r).sqrt() * (c1 + e * (c2 + e * c3)) / (2.0 * t + e)
}

/// `K_ν(t, t)` from the Lommel integral: `(t/2)(J′(t)² + (1 − ν²/t²) J(t)²)`.
pub fn kernel_diagonal(nu: f64, t: f64) -> Result<f64> {
    check_order(nu)?;
    if !(t > 0.0) {
        return param("diagonal kernel needs t > 0");
    }
    let (j, d) = jv_and_derivative(nu, t);
    Ok(0.5 * t * (d * d + (1.0 - nu * nu / (t * t)) * j * j))
}

/// `K_ν(t, r)`: closed form away from the diagonal, quadrature of the
/// defining integral when `|t − r| ≤ 1e−3·max(1, t, r)`.
pub fn kernel_k(nu: f64, t: f64, r: f64) -> Result<f64> {
    check_order(nu)?;
    check_point(t, r)?;
    if (t - r).abs() <= NEAR_DIAGONAL * t.max(r).max(1.0) {
        return Ok(kernel_k_quadrature(nu, t, r));
    }
    let (jt, dt) = jv_and_derivative(nu, t);
    let (jr, dr) = jv_and_derivative(nu, r);
    Ok(closed_form(t, jt, dt, r, jr, dr))
}

/// The three regions `[0, ν/2)`, `[ν/2, 2ν)`, `[2ν, ∞)` plus "everything".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Zero,
    Critical,
    Infinity,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPiece {
    Full,
    J1,
    J2,
    J3,
    J4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub nu: f64,
    pub split: SplitPiece,
    /// Indicator of the `t` region and of the `r` region.
    pub region: (Region, Region),
}

impl KernelSpec {
    pub fn full(nu: f64) -> Self {
        Self { nu, split: SplitPiece::Full, region: (Region::All, Region::All) }
    }

    pub fn piece(nu: f64, split: SplitPiece, region: (Region, Region)) -> Self {
        Self { nu, split, region }
    }

    fn validate(&self) -> Result<()> {
        check_order(self.nu)
    }

    fn indicator(&self, t: f64, r: f64) -> bool {
        let part = RegionPartition::new(self.nu);
        part.contains(self.region.0, t) && part.contains(self.region.1, r)
    }
}

/// Dyadic decomposition of the critical interval around `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    pub nu: f64,
    /// Half-open subintervals of `[ν/2, 2ν)`: the central band `I_0`, then
    /// `I_k^+` and `I_k^−` for `0 ≤ k ≤ ⌊(2/3) log₂ ν⌋`, clipped to the
    /// critical interval. Each entry is `(label, start, end)`.
    pub subintervals: Vec<(String, f64, f64)>,
}

impl RegionPartition {
    pub fn new(nu: f64) -> Self {
        let c = nu.cbrt();
        let (lo, hi) = (0.5 * nu, 2.0 * nu);
        let clip = |a: f64, b: f64| (a.max(lo), b.min(hi));
        let mut subintervals = Vec::new();
        let (a, b) = clip(nu - c, nu + c);
        if b > a {
            subintervals.push(("I0".to_string(), a, b));
        }
        let kmax = if nu > 1.0 { ((2.0 / 3.0) * nu.log2()).floor() as i32 } else { 0 };
        for k in 0..=kmax.max(0) {
            let s = 2f64.powi(k) * c;
            let (a, b) = clip(nu + s, nu + 2.0 * s);
            if b > a {
                subintervals.push((format!("I{k}+"), a, b));
            }
            let (a, b) = clip(nu - 2.0 * s, nu - s);
            if b > a {
                subintervals.push((format!("I{k}-"), a, b));
            }
        }
        Self { nu, subintervals }
    }

    pub fn region_of(&self, x: f64) -> Region {
        if x < 0.5 * self.nu {
            Region::Zero
        } else if x < 2.0 * self.nu {
            Region::Critical
        } else {
            Region::Infinity
        }
    }

    pub fn contains(&self, region: Region, x: f64) -> bool {
        region == Region::All || self.region_of(x) == region
    }

    /// Label of the subinterval containing `x`, if any.
    pub fn locate(&self, x: f64) -> Option<&str> {
        self.subintervals.iter().find(|(_, a, b)| *a <= x && x < *b).map(|(l, _, _)| l.as_str())
    }
}

fn piece_value(split: SplitPiece, t: f64, jt: f64, dt: f64, r: f64, jr: f64, dr: f64) -> f64 {
    let s = (t * r).sqrt();
    match split {
        SplitPiece::Full => closed_form(t, jt, dt, r, jr, dr),
        SplitPiece::J1 => s * dt * jr / (2.0 * (r - t)),
        SplitPiece::J2 => -s * dt * jr / (2.0 * (r + t)),
        SplitPiece::J3 => -s * jt * dr / (2.0 * (r - t)),
        SplitPiece::J4 => -s * jt * dr / (2.0 * (r + t)),
    }
}

/// One piece of the split, times the region indicators.
pub fn kernel_split(spec: &KernelSpec, t: f64, r: f64) -> Result<f64> {
    spec.validate()?;
    check_point(t, r)?;
    if matches!(spec.split, SplitPiece::J1 | SplitPiece::J3) && t == r {
        return Err(LabError::Singularity(t));
    }
    if !spec.indicator(t, r) {
        return Ok(0.0);
    }
    if spec.split == SplitPiece::Full {
        return kernel_k(spec.nu, t, r);
    }
    let (jt, dt) = jv_and_derivative(spec.nu, t);
    let (jr, dr) = jv_and_derivative(spec.nu, r);
    Ok(piece_value(spec.split, t, jt, dt, r, jr, dr))
}

/// `J_ν` and `J_ν′` tabulated at a set of nodes.
#[derive(Debug, Clone)]
pub struct BesselTable {
    pub nu: f64,
    pub nodes: Vec<f64>,
    pub j: Vec<f64>,
    pub jp: Vec<f64>,
}

impl BesselTable {
    pub fn new(nu: f64, nodes: &[f64]) -> Self {
        let pairs: Vec<(f64, f64)> = nodes.par_iter().map(|&x| jv_and_derivative(nu, x)).collect();
        let (j, jp) = pairs.into_iter().unzip();
        Self { nu, nodes: nodes.to_vec(), j, jp }
    }

    /// `K_ν(nodes[i], other.nodes[k])` for the full kernel.
    pub fn kernel(&self, i: usize, other: &BesselTable, k: usize) -> f64 {
        let (t, r) = (self.nodes[i], other.nodes[k]);
        if t == 0.0 || r == 0.0 {
            return 0.0;
        }
        if (t - r).abs() <= TAYLOR_RADIUS {
            near_diagonal(self.nu, t, self.j[i], self.jp[i], r)
        } else {
            closed_form(t, self.j[i], self.jp[i], r, other.j[k], other.jp[k])
        }
    }
}

/// Dense quadrature-weighted kernel matrix `A[i][j] = K(t_i, r_j) w_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub row_nodes: Vec<f64>,
    pub row_weights: Vec<f64>,
    pub col_nodes: Vec<f64>,
    pub col_weights: Vec<f64>,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl DiscreteOperator {
    /// A plain matrix acting on counting measure (unit nodes and weights).
    pub fn from_dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LabError::Structure(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return param("matrix entries must be finite");
        }
        Ok(Self {
            row_nodes: vec![1.0; rows],
            row_weights: vec![1.0; rows],
            col_nodes: vec![1.0; cols],
            col_weights: vec![1.0; cols],
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.row_nodes.len()
    }

    pub fn cols(&self) -> usize {
        self.col_nodes.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Assembles `spec` between two node sets with their quadrature weights.
    pub fn assemble(
        spec: &KernelSpec,
        rows: (&[f64], &[f64]),
        cols: (&[f64], &[f64]),
    ) -> Result<Self> {
        spec.validate()?;
        let (row_nodes, row_weights) = rows;
        let (col_nodes, col_weights) = cols;
        if row_nodes.len() != row_weights.len() || col_nodes.len() != col_weights.len() {
            return Err(LabError::Structure("nodes and weights differ in length".into()));
        }
        let singular = matches!(spec.split, SplitPiece::J1 | SplitPiece::J3);
        if singular {
            if let Some(&t) = row_nodes.iter().find(|t| col_nodes.contains(t)) {
                return Err(LabError::Singularity(t));
            }
        }
        let rt = BesselTable::new(spec.nu, row_nodes);
        let ct = BesselTable::new(spec.nu, col_nodes);
        let part = RegionPartition::new(spec.nu);
        let ncols = col_nodes.len();
        let mut data = vec![0.0; row_nodes.len() * ncols];
        data.par_chunks_mut(ncols).enumerate().for_each(|(i, row)| {
            let t = row_nodes[i];
            if !part.contains(spec.region.0, t) {
                return;
            }
            for (k, out) in row.iter_mut().enumerate() {
                let r = col_nodes[k];
                if !part.contains(spec.region.1, r) || t == 0.0 || r == 0.0 {
                    continue;
                }
                let v = if spec.split == SplitPiece::Full {
                    rt.kernel(i, &ct, k)
                } else {
                    piece_value(spec.split, t, rt.j[i], rt.jp[i], r, ct.j[k], ct.jp[k])
                };
                *out = v * col_weights[k];
            }
        });
        Ok(Self {
            row_nodes: row_nodes.to_vec(),
            row_weights: row_weights.to_vec(),
            col_nodes: col_nodes.to_vec(),
            col_weights: col_weights.to_vec(),
            data,
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.cols();
        self.data.par_chunks(n).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let n = self.cols();
        let mut out = vec![0.0; n];
        for (row, &yi) in self.data.chunks(n).zip(y) {
            if yi != 0.0 {
                for (o, a) in out.iter_mut().zip(row) {
                    *o += a * yi;
                }
            }
        }
        out
    }
}

/// Applies the degree-`k` disc operator in dimension `n` to a radial profile:
/// `T g(t) = t^{−(n−1)/2} ∫ g(r) r^{(n−1)/2} K_{k−1+n/2}(t, r) dr`.
pub fn apply_tkn(n: u32, k: u32, g: &RadialProfile<f64>, out_grid: &Arc<RadialGrid<f64>>) -> Result<RadialProfile<f64>> {
    if n < 2 {
        return param("dimension must be at least 2");
    }
    let nu = f64::from(k) - 1.0 + 0.5 * f64::from(n);
    let half_n1 = 0.5 * (f64::from(n) - 1.0);
    let in_grid = g.grid();
    let in_nodes = in_grid.nodes();
    let h: Vec<Complex64> = g
        .values()
        .iter()
        .zip(in_nodes.iter().zip(in_grid.weights()))
        .map(|(v, (&r, &w))| v * (r.powf(half_n1) * w))
        .collect();
    if h.iter().all(|v| v.norm() == 0.0) {
        return Ok(RadialProfile::zeros(out_grid.clone()));
    }
    let in_table = BesselTable::new(nu, in_nodes);
    let out_table = if Arc::ptr_eq(in_grid, out_grid) || in_nodes == out_grid.nodes() {
        in_table.clone()
    } else {
        BesselTable::new(nu, out_grid.nodes())
    };
    // Value at t = 0: only the k = 0 mode survives, through the small-t limit
    // K(t, r) t^{−(n−1)/2} → √r J_{ν+1}(r) / (r 2^ν Γ(ν+1)).
    let origin = |_: ()| -> Complex64 {
        if k != 0 {
            return Complex64::new(0.0, 0.0);
        }
        let c = (-(nu * 2f64.ln()) - ln_gamma(nu + 1.0)).exp();
        in_nodes
            .iter()
            .zip(&h)
            .filter(|(&r, _)| r > 0.0)
            .map(|(&r, hv)| hv * (c * jv(nu + 1.0, r) / r.sqrt()))
            .sum()
    };
    let values: Vec<Complex64> = out_grid
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            if t == 0.0 {
                return origin(());
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for (kk, hv) in h.iter().enumerate() {
                if in_nodes[kk] > 0.0 {
                    acc += hv * out_table.kernel(i, &in_table, kk);
                }
            }
            acc * t.powf(-half_n1)
        })
        .collect();
    RadialProfile::new(out_grid.clone(), values)
}

/// [`apply_tkn`] for the ball of radius `radius`, through the dilation
/// `T_R g(t) = (T_1 g(·/R))(R t)`.
pub fn apply_tkn_dilated(
    n: u32,
    k: u32,
    radius: f64,
    g: &RadialProfile<f64>,
    out_grid: &Arc<RadialGrid<f64>>,
) -> Result<RadialProfile<f64>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return param("ball radius must be positive");
    }
    let scaled = |grid: &RadialGrid<f64>| -> Result<Arc<RadialGrid<f64>>> {
        Ok(Arc::new(RadialGrid::from_nodes(grid.nodes().iter().map(|r| r * radius).collect())?))
    };
    let g_scaled = RadialProfile::new(scaled(g.grid())?, g.values().to_vec())?;
    let out = apply_tkn(n, k, &g_scaled, &scaled(out_grid)?)?;
    RadialProfile::new(out_grid.clone(), out.values().to_vec())
}

/// Relative defect `‖T(Tg) − Tg‖ / ‖Tg‖` of the degree-`k` operator on a
/// uniform grid `[0, r_max]` of spacing `h`, measured under `r^{n−1}dr` on
/// `[0, window]`.
///
/// `Tg` decays only like `r^{−(n+1)/2}`, so cutting it at `r_max` perturbs
/// `T(Tg)` near the origin by `O(1/r_max)`; measuring on a fixed inner window
/// exposes that rate.
pub fn projection_defect(n: u32, k: u32, g: impl Fn(f64) -> f64, r_max: f64, h: f64, window: f64) -> Result<f64> {
    if !(h > 0.0 && r_max > h && window > 0.0 && window <= r_max) {
        return param("need 0 < h < r_max and 0 < window <= r_max");
    }
    let grid = Arc::new(RadialGrid::uniform(0.0, r_max, (r_max / h).round() as usize + 1)?);
    let tg = apply_tkn(n, k, &RadialProfile::from_real_fn(grid.clone(), g), &grid)?;
    let ttg = apply_tkn(n, k, &tg, &grid)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, (&r, &w)) in grid.nodes().iter().zip(grid.weights()).enumerate() {
        if r <= window {
            let m = w * r.powi(n as i32 - 1);
            num += m * (ttg.values()[i] - tg.values()[i]).norm_sqr();
            den += m * tg.values()[i].norm_sqr();
        }
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).sqrt())
}

/// Relative L² distance, over the disc `|x| ≤ L/4`, between two evaluations
/// of the multiplier for the ball of radius 2π applied to
/// `(x+iy)^k e^{−π|x|²/σ²}`: the periodic FFT on an `n×n` grid of side `l`,
/// and the mode-`k` radial operator on a uniform grid of spacing `h` over
/// `[0, l/2]`. The planar result is sampled bilinearly on 256 angles.
pub fn disc_cross_error(n: usize, l: f64, k: u32, sigma: f64, h: f64) -> Result<f64> {
    use crate::planar::{apply_multiplier, GridField2D, MultiplierSymbol};
    use std::f64::consts::PI;
    if !(sigma > 0.0 && h > 0.0) {
        return param("sigma and h must be positive");
    }
    let kk = k as i32;
    let f = GridField2D::from_fn(n, l, |x, y| {
        Complex64::new(x, y).powi(kk) * (-PI * (x * x + y * y) / (sigma * sigma)).exp()
    })?;
    let tf = apply_multiplier(&MultiplierSymbol::Disc { radius: 2.0 * PI }, &f)?;
    let r_in = 0.5 * l;
    let in_grid = Arc::new(RadialGrid::uniform(0.0, r_in, (r_in / h).round() as usize + 1)?);
    let g = RadialProfile::from_real_fn(in_grid, |r| r.powi(kk) * (-PI * r * r / (sigma * sigma)).exp());
    let r_out = 0.25 * l;
    let out_grid = Arc::new(RadialGrid::uniform(0.0, r_out, (r_out / h).round() as usize + 1)?);
    let tg = apply_tkn_dilated(2, k, 2.0 * PI, &g, &out_grid)?;
    let n_theta = 256;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &r) in out_grid.nodes().iter().enumerate() {
        let w = out_grid.weights()[i] * r;
        for m in 0..n_theta {
            let th = 2.0 * PI * m as f64 / n_theta as f64;
            let expected = tg.values()[i] * Complex64::from_polar(1.0, f64::from(kk) * th);
            let got = tf.sample_bilinear(r * th.cos(), r * th.sin());
            num += w * (got - expected).norm_sqr();
            den += w * expected.norm_sqr();
        }
    }
    if den == 0.0 {
        return Err(LabError::Fit("radial reference vanishes".into()));
    }
    Ok((num / den).sqrt())
}

/// Lower bound on a weighted operator norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn lp_norm(v: &[f64], p: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn dual(v: &[f64], p: f64) -> Vec<f64> {
    let norm = lp_norm(v, p);
    if norm == 0.0 {
        return vec![0.0; v.len()];
    }
    let scale = norm.powf(p - 1.0);
    v.iter().map(|x| x.signum() * x.abs().powf(p - 1.0) / scale).collect()
}

/// Boyd's power iteration for the `ℓ^p(r^α w)` operator norm of `a`.
///
/// Returns the running maximum of `‖A x‖/‖x‖` over the iterates, so the value
/// is a lower bound that never decreases with more iterations.
pub fn lp_operator_norm(a: &DiscreteOperator, p: f64, alpha: f64) -> Result<NormEstimate> {
    if !(p > 1.0 && p.is_finite()) {
        return param(format!("operator norm needs p in (1, inf), got {p}"));
    }
    let measure = |x: f64, w: f64| -> f64 {
        if x == 0.0 && alpha != 0.0 {
            0.0
        } else {
            x.powf(alpha) * w
        }
    };
    let mu_row: Vec<f64> = a.row_nodes.iter().zip(&a.row_weights).map(|(&x, &w)| measure(x, w).powf(1.0 / p)).collect();
    let mu_col: Vec<f64> = a.col_nodes.iter().zip(&a.col_weights).map(|(&x, &w)| measure(x, w).powf(1.0 / p)).collect();
    let live: Vec<usize> = (0..a.cols()).filter(|&j| mu_col[j] > 0.0).collect();
    let m = live.len();
    if m == 0 {
        return Ok(NormEstimate { value: 0.0, iterations: 0, converged: true });
    }
    let ncols = a.cols();
    let mut b = Vec::with_capacity(a.rows() * m);
    for (i, row) in a.data.chunks(ncols).enumerate() {
        b.extend(live.iter().map(|&j| mu_row[i] * row[j] / mu_col[j]));
    }
    let op = DiscreteOperator {
        row_nodes: vec![1.0; a.rows()],
        row_weights: vec![1.0; a.rows()],
        col_nodes: vec![1.0; m],
        col_weights: vec![1.0; m],
        data: b,
    };
    let q = p / (p - 1.0);
    let mut x = vec![(m as f64).powf(-1.0 / p); m];
    let mut best: f64 = 0.0;
    let mut prev = f64::NAN;
    for it in 1..=200 {
        let y = op.apply(&x);
        let est = lp_norm(&y, p);
        if est == 0.0 && it == 1 && op.data.iter().all(|&v| v == 0.0) {
            return Ok(NormEstimate { value: 0.0, iterations: it, converged: true });
        }
        best = best.max(est);
        if it > 1 && (est - prev).abs() <= 1e-6 * est.max(f64::MIN_POSITIVE) {
            return Ok(NormEstimate { value: best, iterations: it, converged: true });
        }
        prev = est;
        let z = op.apply_transpose(&dual(&y, p));
        if z.iter().all(|&v| v == 0.0) {
            return Ok(NormEstimate { value: best, iterations: it, converged: true });
        }
        x = dual(&z, q);
    }
    Ok(NormEstimate { value: best, iterations: 200, converged: false })
}

/// Blocks of the `K^1` piece probed by [`kj_uniformity_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalBlock {
    CC,
    CInf,
    InfC,
}

impl CriticalBlock {
    pub fn label(&self) -> &'static str {
        match self {
            CriticalBlock::CC => "c,c",
            CriticalBlock::CInf => "c,inf",
            CriticalBlock::InfC => "inf,c",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KjRow {
    pub nu: f64,
    pub p: f64,
    pub block: CriticalBlock,
    pub alpha: f64,
    pub norm_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn write_kj_csv<W: Write>(rows: &[KjRow], mut w: W) -> Result<()> {
    writeln!(w, "nu,p,block,alpha,norm_estimate,iterations,converged")?;
    for r in rows {
        writeln!(
            w,
            "{},{},\"{}\",{},{:.17e},{},{}",
            r.nu,
            r.p,
            r.block.label(),
            r.alpha,
            r.norm_estimate,
            r.iterations,
            r.converged
        )?;
    }
    Ok(())
}

/// Node spacing used on the critical interval: 20 nodes per 2π and 16 per
/// transition band `ν^{1/3}`.
pub fn critical_spacing(nu: f64) -> f64 {
    (2.0 * std::f64::consts::PI / 20.0).min(nu.cbrt() / 16.0)
}

fn staggered(a: f64, b: f64, h: f64, offset: f64) -> Vec<f64> {
    let count = ((b - a) / h).floor() as usize;
    (0..count).map(|i| a + (i as f64 + offset) * h).filter(|&x| x < b).collect()
}

/// `L^p(dr)` norm estimates of the `K^1` blocks between the critical region
/// and its neighbour `[2ν, 4ν)`. Rows and columns sit on interleaved grids,
/// a standard discretization of the Hilbert-type singularity at `t = r`.
pub fn kj_uniformity_scan(p: f64, nu_list: &[f64], blocks: &[CriticalBlock]) -> Result<Vec<KjRow>> {
    if !(p > 1.0) {
        return param("p must exceed 1");
    }
    let mut out = Vec::new();
    for &nu in nu_list {
        if nu < 1.0 {
            return param("uniformity scan needs nu >= 1");
        }
        let h = critical_spacing(nu);
        let crit = |offset| staggered(0.5 * nu, 2.0 * nu, h, offset);
        let inf = |offset| staggered(2.0 * nu, 4.0 * nu, h, offset);
        for &block in blocks {
            let (rows, cols) = match block {
                CriticalBlock::CC => (crit(0.0), crit(0.5)),
                CriticalBlock::CInf => (crit(0.0), inf(0.5)),
                CriticalBlock::InfC => (inf(0.0), crit(0.5)),
            };
            let rw = vec![h; rows.len()];
            let cw = vec![h; cols.len()];
            let spec = KernelSpec::piece(nu, SplitPiece::J1, (Region::All, Region::All));
            let op = DiscreteOperator::assemble(&spec, (&rows, &rw), (&cols, &cw))?;
            let est = lp_operator_norm(&op, p, 0.0)?;
            out.push(KjRow {
                nu,
                p,
                block,
                alpha: 0.0,
                norm_estimate: est.value,
                iterations: est.iterations,
                converged: est.converged,
            });
        }
    }
    Ok(out)
}

/// LHS/RHS of the vector-valued weighted inequality for a batch of profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMixedResult {
    pub p: f64,
    pub n: u32,
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `None` when every input profile vanishes.
    pub ratio: Option<f64>,
}

/// Compares `(∫(Σ|K_{ν_l} g_l|²)^{p/2} t^α dt)^{1/p}` with the same
/// expression for the `g_l`, `α = (n−1)(1−p/2)`, on the common input grid.
pub fn weighted_mixed_test(p: f64, n: u32, batch: &[(f64, RadialProfile<f64>)]) -> Result<WeightedMixedResult> {
    if n < 2 {
        return param("dimension must be at least 2");
    }
    let nf = f64::from(n);
    let (lo, hi) = (2.0 * nf / (nf + 1.0), 2.0 * nf / (nf - 1.0));
    if !(p > lo && p < hi) {
        return param(format!("p = {p} outside ({lo}, {hi})"));
    }
    let alpha = (nf - 1.0) * (1.0 - 0.5 * p);
    let first = batch.first().ok_or_else(|| LabError::Parameter("empty batch".into()))?;
    let grid = first.1.grid().clone();
    let mut amp_in = vec![0.0; grid.len()];
    let mut amp_out = vec![0.0; grid.len()];
    for (nu, g) in batch {
        if g.grid().nodes() != grid.nodes() {
            return Err(LabError::Structure("batch profiles must share a grid".into()));
        }
        for (a, v) in amp_in.iter_mut().zip(g.values()) {
            *a += v.norm_sqr();
        }
        if g.values().iter().all(|v| v.norm() == 0.0) {
            continue;
        }
        let spec = KernelSpec::full(*nu);
        let op = DiscreteOperator::assemble(&spec, (grid.nodes(), grid.weights()), (grid.nodes(), grid.weights()))?;
        let re: Vec<f64> = g.values().iter().map(|v| v.re).collect();
        let im: Vec<f64> = g.values().iter().map(|v| v.im).collect();
        let (kre, kim) = (op.apply(&re), op.apply(&im));
        for (a, (x, y)) in amp_out.iter_mut().zip(kre.iter().zip(&kim)) {
            *a += x * x + y * y;
        }
    }
    let to_profile = |amp: &[f64]| RadialProfile::from_real_fn_indexed(grid.clone(), |i| amp[i].sqrt());
    let lhs = weighted_lp_norm(&to_profile(&amp_out), p, alpha)?.value;
    let rhs = weighted_lp_norm(&to_profile(&amp_in), p, alpha)?.value;
    let ratio = if rhs > 0.0 { Some(lhs / rhs) } else { None };
    Ok(WeightedMixedResult { p, n, alpha, lhs, rhs, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridScheme;
    use std::f64::consts::PI;

    fn half_oracle(t: f64, r: f64) -> f64 {
        let sinc = |x: f64| if x == 0.0 { 1.0 } else { x.sin() / x };
        (sinc(t - r) - sinc(t + r)) / PI
    }

    #[test]
    fn half_order_kernel_matches_elementary_form() {
        assert!((kernel_k(0.5, PI, PI).unwrap() - 1.0 / PI).abs() < 1e-8);
        for &(t, r) in &[(1.0, 2.0), (10.0, 3.5), (40.0, 40.00001), (0.2, 49.0)] {
            assert!((kernel_k(0.5, t, r).unwrap() - half_oracle(t, r)).abs() < 1e-8, "{t} {r}");
        }
    }

    #[test]
    fn symmetry_and_quadrature_agreement() {
        for nu in [1.0, 2.5, 10.0] {
            let a = kernel_k(nu, 1.0, 2.0).unwrap();
            let b = kernel_k(nu, 2.0, 1.0).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        let cf = kernel_k(3.0, 5.0, 7.0).unwrap();
        assert!((cf - kernel_k_quadrature(3.0, 5.0, 7.0)).abs() < 1e-8);
    }

    #[test]
    fn diagonal_forms_agree() {
        for &(nu, t) in &[(0.0, 3.0), (1.5, 7.0), (20.0, 19.0), (64.0, 80.0)] {
            let lommel = kernel_diagonal(nu, t).unwrap();
            assert!((lommel - kernel_k_quadrature(nu, t, t)).abs() < 1e-10);
        }
    }

    #[test]
    fn taylor_branch_matches_quadrature() {
        for &(nu, t) in &[(0.0, 3.0), (2.0, 15.0), (30.5, 32.0), (100.0, 140.0)] {
            let table = BesselTable::new(nu, &[t]);
            for e in [0.0, 3e-5, -1e-4] {
                let r = t + e;
                let taylor = near_diagonal(nu, t, table.j[0], table.jp[0], r);
                assert!((taylor - kernel_k_quadrature(nu, t, r)).abs() < 1e-10, "nu={nu} t={t} e={e}");
            }
        }
    }

    #[test]
    fn split_sums_to_full() {
        let total: f64 = [SplitPiece::J1, SplitPiece::J2, SplitPiece::J3, SplitPiece::J4]
            .iter()
            .map(|&s| kernel_split(&KernelSpec::piece(2.0, s, (Region::All, Region::All)), 3.0, 5.0).unwrap())
            .sum();
        assert!((total - kernel_k(2.0, 3.0, 5.0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn split_regions_and_singularity() {
        let spec = KernelSpec::piece(4.0, SplitPiece::J2, (Region::Zero, Region::Critical));
        assert_eq!(kernel_split(&spec, 10.0, 3.0).unwrap(), 0.0);
        let j1 = KernelSpec::piece(4.0, SplitPiece::J1, (Region::All, Region::All));
        assert!(matches!(kernel_split(&j1, 2.0, 2.0), Err(LabError::Singularity(_))));
        let j2 = KernelSpec::piece(0.5, SplitPiece::J2, (Region::All, Region::All));
        let v = kernel_split(&j2, PI, PI).unwrap();
        // J_{1/2}(π) = 0 and J′_{1/2}(π) = −√(2/π)/π, so j2 = √(2/π)·0/... = 0 up to rounding.
        assert!(v.is_finite() && v.abs() < 1e-12);
    }

    #[test]
    fn partition_is_disjoint() {
        for nu in [8.0, 100.0, 512.0] {
            let part = RegionPartition::new(nu);
            let mut iv: Vec<(f64, f64)> = part.subintervals.iter().map(|(_, a, b)| (*a, *b)).collect();
            iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for w in iv.windows(2) {
                assert!(w[0].1 <= w[1].0 + 1e-12);
            }
            assert!(iv.iter().all(|&(a, b)| a >= 0.5 * nu && b <= 2.0 * nu));
        }
    }

    #[test]
    fn operator_norm_examples() {
        let id = DiscreteOperator::from_dense(3, 3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        for p in [1.3, 2.0, 5.0] {
            assert!((lp_operator_norm(&id, p, 0.0).unwrap().value - 1.0).abs() < 1e-9);
        }
        let swap = DiscreteOperator::from_dense(2, 2, vec![0., 1., 1., 0.]).unwrap();
        assert!((lp_operator_norm(&swap, 2.0, 0.0).unwrap().value - 1.0).abs() < 1e-9);
        let diag = DiscreteOperator::from_dense(2, 2, vec![3., 0., 0., 1.]).unwrap();
        assert!((lp_operator_norm(&diag, 3.0, 0.0).unwrap().value - 3.0).abs() < 1e-6);
        let zero = DiscreteOperator::from_dense(2, 2, vec![0.0; 4]).unwrap();
        assert_eq!(lp_operator_norm(&zero, 2.0, 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let g = Arc::new(RadialGrid::make(GridScheme::Linear, 10.0, 64).unwrap());
        let out = apply_tkn(2, 1, &RadialProfile::zeros(g.clone()), &g).unwrap();
        assert!(out.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_order_scan_is_finite() {
        let rows = kj_uniformity_scan(2.0, &[16.0], &[CriticalBlock::CC]).unwrap();
        assert!(rows[0].norm_estimate.is_finite() && rows[0].norm_estimate > 0.0);
    }

    #[test]
    fn weighted_test_guards() {
        let g = Arc::new(RadialGrid::make(GridScheme::Linear, 10.0, 64).unwrap());
        let z = RadialProfile::zeros(g.clone());
        let res = weighted_mixed_test(2.0, 2, &[(2.0, z.clone())]).unwrap();
        assert!(res.ratio.is_none());
        assert!(weighted_mixed_test(1.2, 2, &[(2.0, z)]).is_err());
    }
}
