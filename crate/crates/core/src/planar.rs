//! Fourier multipliers on an `N × N` periodic grid of side `L`.
//!
//! Frequencies are angular: grid index `m` carries `ξ = 2π m / L`. The
//! transform pair is the plain DFT, so a multiplier commutes with the sample
//! offset `−L/2`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{param, LabError, Result};

/// Complex samples at `(iL/N − L/2, jL/N − L/2)`, stored as `values[i·N + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField2D {
    n: usize,
    l: f64,
    values: Vec<Complex64>,
}

impl GridField2D {
    pub fn new(n: usize, l: f64, values: Vec<Complex64>) -> Result<Self> {
        if n < 32 || !n.is_power_of_two() {
            return param(format!("grid side must be a power of two >= 32, got {n}"));
        }
        if !(l > 0.0 && l.is_finite()) {
            return param("side length must be positive");
        }
        if values.len() != n * n {
            return Err(LabError::Structure(format!("{} samples for an {n}x{n} grid", values.len())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return param("field samples must be finite");
        }
        Ok(Self { n, l, values })
    }

    pub fn zeros(n: usize, l: f64) -> Result<Self> {
        Self::new(n, l, vec![Complex64::new(0.0, 0.0); n * n])
    }

    pub fn from_fn(n: usize, l: f64, f: impl Fn(f64, f64) -> Complex64 + Sync) -> Result<Self> {
        let h = l / n as f64;
        let values: Vec<Complex64> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                f(i as f64 * h - 0.5 * l, j as f64 * h - 0.5 * l)
            })
            .collect();
        Self::new(n, l, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn position(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.spacing();
        (i as f64 * h - 0.5 * self.l, j as f64 * h - 0.5 * self.l)
    }

    /// Euclidean `ℓ²` norm of the samples times the cell area, i.e. the
    /// Riemann approximation of the planar L² norm.
    pub fn l2(&self) -> f64 {
        let h = self.spacing();
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * h * h).sqrt()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64 + Sync) -> Self {
        Self { n: self.n, l: self.l, values: self.values.par_iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64 + Sync) -> Result<Self> {
        if self.n != other.n || self.l != other.l {
            return Err(LabError::Structure("fields live on different grids".into()));
        }
        let values = self.values.par_iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { n: self.n, l: self.l, values })
    }

    /// Multiplies by `e^{i x·ξ₀}`.
    pub fn modulate(&self, xi0: [f64; 2]) -> Self {
        let n = self.n;
        let values = self
            .values
            .par_iter()
            .enumerate()
            .map(|(idx, &v)| {
                let (x, y) = self.position(idx / n, idx % n);
                v * Complex64::from_polar(1.0, x * xi0[0] + y * xi0[1])
            })
            .collect();
        Self { n, l: self.l, values }
    }

    /// Bilinear interpolation with periodic wrap-around.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Complex64 {
        let n = self.n;
        let scale = n as f64 / self.l;
        let u = (x + 0.5 * self.l) * scale;
        let v = (y + 0.5 * self.l) * scale;
        let (fu, fv) = (u.floor(), v.floor());
        let (du, dv) = (u - fu, v - fv);
        let wrap = |k: f64| (k as i64).rem_euclid(n as i64) as usize;
        let (i0, j0) = (wrap(fu), wrap(fv));
        let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);
        let at = |i: usize, j: usize| self.values[i * n + j];
        at(i0, j0) * ((1.0 - du) * (1.0 - dv))
            + at(i1, j0) * (du * (1.0 - dv))
            + at(i0, j1) * ((1.0 - du) * dv)
            + at(i1, j1) * (du * dv)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,re,im")?;
        for (idx, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{:.17e},{:.17e}", idx / self.n, idx % self.n, v.re, v.im)?;
        }
        Ok(())
    }

    /// Reads the `i,j,re,im` layout; `l` is not stored in the file.
    pub fn read_csv<R: BufRead>(reader: R, n: usize, l: f64) -> Result<Self> {
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        let mut seen = 0usize;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let bad = || LabError::Parse(format!("line {}: {line:?}", lineno + 1));
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad());
            }
            let i: usize = cols[0].parse().map_err(|_| bad())?;
            let j: usize = cols[1].parse().map_err(|_| bad())?;
            let re: f64 = cols[2].parse().map_err(|_| bad())?;
            let im: f64 = cols[3].parse().map_err(|_| bad())?;
            if i >= n || j >= n {
                return Err(bad());
            }
            values[i * n + j] = Complex64::new(re, im);
            seen += 1;
        }
        if seen != n * n {
            return Err(LabError::Parse(format!("expected {} samples, read {seen}", n * n)));
        }
        Self::new(n, l, values)
    }
}

/// In-place 2D DFT (unnormalized forward, `1/N²`-normalized inverse).
fn fft2(values: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let pass = |data: &mut [Complex64]| {
        data.par_chunks_mut(n).for_each(|row| fft.process(row));
    };
    pass(values);
    transpose(values, n);
    pass(values);
    transpose(values, n);
    if inverse {
        let s = 1.0 / (n * n) as f64;
        values.par_iter_mut().for_each(|v| *v *= s);
    }
}

fn transpose(values: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(n) {
                    values.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Signed frequency index of DFT bin `m`.
fn signed_index(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// A unit vector, checked to 1e−12.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction(pub [f64; 2]);

impl Direction {
    pub fn new(v: [f64; 2]) -> Result<Self> {
        if ((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs() > 1e-12 {
            return param("direction must be a unit vector");
        }
        Ok(Self(v))
    }

    pub fn from_angle(theta: f64) -> Self {
        Self([theta.cos(), theta.sin()])
    }

    fn dot(&self, xi: [f64; 2]) -> f64 {
        self.0[0] * xi[0] + self.0[1] * xi[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiplierSymbol {
    Disc { radius: f64 },
    BallShifted { radius: f64, center: [f64; 2] },
    HalfPlane { omega: Direction },
    DirectionalHilbert { omega: Direction },
    /// Kernel `p.v. Ω(y) / (2π|y|²)` with `Ω(θ) = Σ c_m e^{imθ}`, `c_0 = 0`.
    Homogeneous { coeffs: Vec<(i32, [f64; 2])> },
}

const EDGE_TOL: f64 = 1e-12;

fn step(signed_distance: f64, scale: f64) -> f64 {
    if signed_distance.abs() <= EDGE_TOL * scale {
        0.5
    } else if signed_distance < 0.0 {
        1.0
    } else {
        0.0
    }
}

impl MultiplierSymbol {
    pub fn validate(&self) -> Result<()> {
        match self {
            MultiplierSymbol::Disc { radius } | MultiplierSymbol::BallShifted { radius, .. } => {
                if !(*radius > 0.0) {
                    return param("ball radius must be positive");
                }
            }
            MultiplierSymbol::HalfPlane { omega } | MultiplierSymbol::DirectionalHilbert { omega } => {
                Direction::new(omega.0)?;
            }
            MultiplierSymbol::Homogeneous { coeffs } => {
                if coeffs.iter().any(|(m, c)| *m == 0 && (c[0] != 0.0 || c[1] != 0.0)) {
                    return param("Omega must have zero mean on the circle");
                }
            }
        }
        Ok(())
    }

    /// Symbol value at angular frequency `ξ`.
    pub fn value(&self, xi: [f64; 2]) -> Complex64 {
        let one = |v: f64| Complex64::new(v, 0.0);
        match self {
            MultiplierSymbol::Disc { radius } => one(step(xi[0].hypot(xi[1]) - radius, *radius)),
            MultiplierSymbol::BallShifted { radius, center } => {
                one(step((xi[0] - center[0]).hypot(xi[1] - center[1]) - radius, *radius))
            }
            MultiplierSymbol::HalfPlane { omega } => {
                one(step(omega.dot(xi), 1.0 + xi[0].hypot(xi[1])))
            }
            MultiplierSymbol::DirectionalHilbert { omega } => {
                let d = omega.dot(xi);
                if d.abs() <= EDGE_TOL * (1.0 + xi[0].hypot(xi[1])) {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, d.signum())
                }
            }
            MultiplierSymbol::Homogeneous { coeffs } => {
                if xi == [0.0, 0.0] {
                    return Complex64::new(0.0, 0.0);
                }
                let phi = xi[1].atan2(xi[0]);
                coeffs
                    .iter()
                    .filter(|(m, _)| *m != 0)
                    .map(|&(m, c)| {
                        let am = m.unsigned_abs();
                        let factor = Complex64::new(0.0, -1.0).powu(am) / f64::from(am);
                        Complex64::new(c[0], c[1]) * factor * Complex64::from_polar(1.0, f64::from(m) * phi)
                    })
                    .sum()
            }
        }
    }
}

/// Forward DFT, multiplication by the symbol at `2πm/L`, inverse DFT.
pub fn apply_multiplier(sym: &MultiplierSymbol, f: &GridField2D) -> Result<GridField2D> {
    sym.validate()?;
    let n = f.n;
    let mut data = f.values.clone();
    fft2(&mut data, n, false);
    let dk = 2.0 * PI / f.l;
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi0 = signed_index(i, n) as f64 * dk;
        for (j, v) in row.iter_mut().enumerate() {
            *v *= sym.value([xi0, signed_index(j, n) as f64 * dk]);
        }
    });
    fft2(&mut data, n, true);
    Ok(GridField2D { n, l: f.l, values: data })
}

/// Fraction of spectral energy with `max(|m_x|, |m_y|) > N/4`.
pub fn aliasing_indicator(f: &GridField2D) -> f64 {
    let n = f.n;
    let mut data = f.values.clone();
    fft2(&mut data, n, false);
    let (mut outer, mut total) = (0.0, 0.0);
    for (idx, v) in data.iter().enumerate() {
        let e = v.norm_sqr();
        total += e;
        let (a, b) = (signed_index(idx / n, n).abs(), signed_index(idx % n, n).abs());
        if a.max(b) > (n / 4) as i64 {
            outer += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outer / total
    }
}

/// `(∫|f(r, θ)|² dθ)^{1/2}` at each radius, from `n_theta` bilinear samples.
pub fn angular_l2(f: &GridField2D, radii: &[f64], n_theta: usize) -> Vec<f64> {
    let dtheta = 2.0 * PI / n_theta as f64;
    let trig: Vec<(f64, f64)> = (0..n_theta).map(|m| (m as f64 * dtheta).sin_cos()).collect();
    radii
        .par_iter()
        .map(|&r| {
            let s: f64 = trig.iter().map(|&(s, c)| f.sample_bilinear(r * c, r * s).norm_sqr()).sum();
            (s * dtheta).sqrt()
        })
        .collect()
}

/// `(∫₀^{L/2} (∫|f|² dθ)^{p/2} r dr)^{1/p}` with `N/2` radial and `4N`
/// angular samples.
pub fn mixed_norm_grid(f: &GridField2D, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return param("mixed norm needs p >= 1");
    }
    let n_r = f.n / 2;
    let h = 0.5 * f.l / n_r as f64;
    let radii: Vec<f64> = (0..=n_r).map(|k| k as f64 * h).collect();
    let amp = angular_l2(f, &radii, 4 * f.n);
    let s: f64 = amp
        .iter()
        .zip(&radii)
        .enumerate()
        .map(|(k, (a, r))| {
            let w = if k == 0 || k == n_r { 0.5 } else { 1.0 };
            w * a.powf(p) * r
        })
        .sum();
    Ok((s * h).powf(1.0 / p))
}

/// Gaussian `e^{−|x−c|²/(2w²)}` sampled on the grid.
pub fn gaussian_bump(n: usize, l: f64, center: [f64; 2], width: f64) -> Result<GridField2D> {
    GridField2D::from_fn(n, l, |x, y| {
        let d2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
        Complex64::new((-d2 / (2.0 * width * width)).exp(), 0.0)
    })
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(LabError::Fit("need at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::Fit("degenerate abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Partial integrals `P(R) = ∫_2^R A(r)^p r dr` at dyadic `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialIntegrals {
    pub p: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Ratio of the last two dyadic increments.
    pub increment_ratio: f64,
    /// Geometric extrapolation of the remaining tail relative to `P(R_max)`;
    /// infinite when the increments do not shrink.
    pub tail_fraction: f64,
    pub diverges: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeDecayResult {
    pub n: usize,
    pub l: f64,
    /// `None` when the field vanishes and the fit is rejected.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub fit_range: (f64, f64),
    pub partials: Vec<PartialIntegrals>,
    pub aliasing: f64,
}

/// Increment ratio at or above which the partial integrals are called divergent.
pub const DIVERGENCE_RATIO: f64 = 0.8;

/// Decay of `A(r) = (∫|g|²dθ)^{1/2}` for a field `g`, fitted on `fit_range`,
/// plus partial integrals at `R = 4, 8, …, R_max`.
pub fn decay_profile(g: &GridField2D, fit_range: (f64, f64), ps: &[f64], r_max: f64) -> Result<CubeDecayResult> {
    let n_theta = 4 * g.n;
    let fit_radii: Vec<f64> =
        (0..64).map(|k| fit_range.0 * (fit_range.1 / fit_range.0).powf(k as f64 / 63.0)).collect();
    let fit_amp = angular_l2(g, &fit_radii, n_theta);
    let (slope, intercept) = if fit_amp.iter().all(|&a| a > 0.0) {
        let lx: Vec<f64> = fit_radii.iter().map(|r| r.ln()).collect();
        let ly: Vec<f64> = fit_amp.iter().map(|a| a.ln()).collect();
        let (s, c) = linear_fit(&lx, &ly)?;
        (Some(s), Some(c))
    } else {
        (None, None)
    };

    let h = g.spacing();
    let count = ((r_max - 2.0) / h).round() as usize;
    let radii: Vec<f64> = (0..=count).map(|k| 2.0 + k as f64 * h).collect();
    let amp = angular_l2(g, &radii, n_theta);
    let mut dyadic = Vec::new();
    let mut big_r = 4.0;
    while big_r <= r_max + 1e-9 {
        dyadic.push(big_r);
        big_r *= 2.0;
    }
    let partials = ps
        .iter()
        .map(|&p| {
            let mut values = Vec::new();
            let mut acc = 0.0;
            let mut next = 0;
            for k in 1..radii.len() {
                let (a, b) = (amp[k - 1].powf(p) * radii[k - 1], amp[k].powf(p) * radii[k]);
                acc += 0.5 * h * (a + b);
                if next < dyadic.len() && radii[k] >= dyadic[next] - 1e-9 {
                    values.push(acc);
                    next += 1;
                }
            }
            let m = values.len();
            let (ratio, tail) = if m >= 3 {
                let d_last = values[m - 1] - values[m - 2];
                let d_prev = values[m - 2] - values[m - 3];
                let q = if d_prev > 0.0 { d_last / d_prev } else { f64::INFINITY };
                let tail = if q < 1.0 { d_last * q / (1.0 - q) / values[m - 1] } else { f64::INFINITY };
                (q, tail)
            } else {
                (f64::NAN, f64::NAN)
            };
            PartialIntegrals {
                p,
                radii: dyadic[..m].to_vec(),
                values,
                increment_ratio: ratio,
                tail_fraction: tail,
                diverges: ratio >= DIVERGENCE_RATIO,
            }
        })
        .collect();
    Ok(CubeDecayResult {
        n: g.n,
        l: g.l,
        slope,
        intercept,
        fit_range,
        partials,
        aliasing: 0.0,
    })
}

/// `H_{e₂}` applied to the indicator of `[−½, ½]²`, then [`decay_profile`].
///
/// The `N × N` grid of side `L` is embedded in a zero-padded grid of twice the
/// size, so the periodic images of the singular output stay out of the
/// measured annuli. Partial integrals run up to `R = L/2`.
pub fn cube_decay_experiment(n: usize, l: f64, fit_range: (f64, f64), ps: &[f64]) -> Result<CubeDecayResult> {
    if !(fit_range.0 >= 2.0 && fit_range.1 <= 0.25 * l && fit_range.0 < fit_range.1) {
        return param(format!("fit range {fit_range:?} must lie in [2, L/4] = [2, {}]", 0.25 * l));
    }
    let cube = GridField2D::from_fn(2 * n, 2.0 * l, |x, y| {
        let side = |t: f64| {
            let a = t.abs();
            if a < 0.5 {
                1.0
            } else if a == 0.5 {
                0.5
            } else {
                0.0
            }
        };
        Complex64::new(side(x) * side(y), 0.0)
    })?;
    let sym = MultiplierSymbol::DirectionalHilbert { omega: Direction([0.0, 1.0]) };
    let hf = apply_multiplier(&sym, &cube)?;
    let mut res = decay_profile(&hf, fit_range, ps, 0.5 * l)?;
    res.n = n;
    res.l = l;
    res.aliasing = aliasing_indicator(&cube);
    Ok(res)
}

/// Mixed-norm distance between the shifted-ball outputs `R_k = 2^k`,
/// `ξ_k = −R_k ω` and the half-plane output, for `k = 1..=k_max`.
pub fn ball_to_halfplane_limit(f: &GridField2D, omega: Direction, k_max: u32, p: f64) -> Result<Vec<f64>> {
    let half = apply_multiplier(&MultiplierSymbol::HalfPlane { omega }, f)?;
    (1..=k_max)
        .map(|k| {
            let r = 2f64.powi(k as i32);
            let sym = MultiplierSymbol::BallShifted { radius: r, center: [-r * omega.0[0], -r * omega.0[1]] };
            let ball = apply_multiplier(&sym, f)?;
            mixed_norm_grid(&ball.zip_with(&half, |a, b| a - b)?, p)
        })
        .collect()
}

fn root_sum_squares(fields: &[GridField2D]) -> Result<GridField2D> {
    let first = &fields[0];
    let mut acc = vec![0.0; first.values.len()];
    for f in fields {
        if f.n != first.n || f.l != first.l {
            return Err(LabError::Structure("batch fields live on different grids".into()));
        }
        for (a, v) in acc.iter_mut().zip(&f.values) {
            *a += v.norm_sqr();
        }
    }
    GridField2D::new(first.n, first.l, acc.into_iter().map(|a| Complex64::new(a.sqrt(), 0.0)).collect())
}

/// `‖(Σ|H_j f_j|²)^{1/2}‖ / ‖(Σ|f_j|²)^{1/2}‖` in the mixed norm; `None`
/// when every input vanishes.
pub fn meyer_vector_test(dirs: &[Direction], batch: &[GridField2D], p: f64) -> Result<Option<f64>> {
    if batch.is_empty() {
        return param("empty batch");
    }
    if dirs.len() != batch.len() {
        return Err(LabError::Structure("one direction per batch member".into()));
    }
    let outputs: Vec<GridField2D> = dirs
        .iter()
        .zip(batch)
        .map(|(&omega, f)| apply_multiplier(&MultiplierSymbol::DirectionalHilbert { omega }, f))
        .collect::<Result<_>>()?;
    let den = mixed_norm_grid(&root_sum_squares(batch)?, p)?;
    if den == 0.0 {
        return Ok(None);
    }
    Ok(Some(mixed_norm_grid(&root_sum_squares(&outputs)?, p)? / den))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub max: f64,
    pub mean: f64,
    pub trials: usize,
}

/// Mixed-norm ratios `‖Tf‖/‖f‖` of the homogeneous operator with
/// coefficients `coeffs` over the trial fields.
pub fn singular_integral_test(coeffs: &[(i32, [f64; 2])], p: f64, trials: &[GridField2D]) -> Result<RatioStats> {
    let sym = MultiplierSymbol::Homogeneous { coeffs: coeffs.to_vec() };
    sym.validate()?;
    if !(p > 1.0) {
        return param("p must exceed 1");
    }
    let mut ratios = Vec::new();
    for f in trials {
        let den = mixed_norm_grid(f, p)?;
        if den == 0.0 {
            continue;
        }
        ratios.push(mixed_norm_grid(&apply_multiplier(&sym, f)?, p)? / den);
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let mean = if ratios.is_empty() { 0.0 } else { ratios.iter().sum::<f64>() / ratios.len() as f64 };
    Ok(RatioStats { max, mean, trials: ratios.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> GridField2D {
        gaussian_bump(64, 16.0, [0.3, -0.2], 1.0).unwrap()
    }

    #[test]
    fn parseval_and_round_trip() {
        let f = bump();
        let mut data = f.values().to_vec();
        fft2(&mut data, 64, false);
        let e_space: f64 = f.values().iter().map(|v| v.norm_sqr()).sum();
        let e_freq: f64 = data.iter().map(|v| v.norm_sqr()).sum::<f64>() / (64.0 * 64.0);
        assert!((e_space - e_freq).abs() < 1e-10 * e_space);
        fft2(&mut data, 64, true);
        for (a, b) in data.iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn disc_is_idempotent_and_large_disc_is_identity() {
        let f = bump();
        let sym = MultiplierSymbol::Disc { radius: 1.3 };
        let once = apply_multiplier(&sym, &f).unwrap();
        let twice = apply_multiplier(&sym, &once).unwrap();
        // 1.3 is not a lattice radius, so no frequency sits on the ring.
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).norm() < 1e-12);
        }
        let id = apply_multiplier(&MultiplierSymbol::Disc { radius: 1e3 }, &f).unwrap();
        for (a, b) in id.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn hilbert_squared_is_minus_identity_off_the_null_line() {
        // A bump modulated far enough that its spectrum is negligible on ξ₂ = 0.
        let dk = 2.0 * PI / 16.0;
        let f = gaussian_bump(64, 16.0, [0.0, 0.0], 1.0).unwrap().modulate([0.0, 16.0 * dk]);
        let sym = MultiplierSymbol::DirectionalHilbert { omega: Direction([0.0, 1.0]) };
        let hh = apply_multiplier(&sym, &apply_multiplier(&sym, &f).unwrap()).unwrap();
        let err: f64 = hh.values().iter().zip(f.values()).map(|(a, b)| (a + b).norm_sqr()).sum::<f64>().sqrt();
        let tot: f64 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / tot < 1e-6);
    }

    #[test]
    fn modulation_covariance() {
        let dk = 2.0 * PI / 16.0;
        let f = gaussian_bump(64, 16.0, [0.5, 0.1], 1.2).unwrap();
        let xi0 = [3.0 * dk, -2.0 * dk];
        let direct = apply_multiplier(&MultiplierSymbol::BallShifted { radius: 1.1, center: xi0 }, &f).unwrap();
        let conj = apply_multiplier(&MultiplierSymbol::Disc { radius: 1.1 }, &f.modulate([-xi0[0], -xi0[1]]))
            .unwrap()
            .modulate(xi0);
        for (a, b) in direct.values().iter().zip(conj.values()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn mixed_norm_of_disc_indicator() {
        let f = GridField2D::from_fn(256, 8.0, |x, y| {
            Complex64::new(if x * x + y * y <= 1.0 { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let v = mixed_norm_grid(&f, 2.0).unwrap();
        assert!((v - PI.sqrt()).abs() < 0.02 * PI.sqrt());
        assert_eq!(mixed_norm_grid(&GridField2D::zeros(32, 1.0).unwrap(), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn symbol_validation() {
        assert!(Direction::new([1.0, 1.0]).is_err());
        let bad = MultiplierSymbol::Homogeneous { coeffs: vec![(0, [1.0, 0.0])] };
        assert!(bad.validate().is_err());
        let riesz = MultiplierSymbol::Homogeneous { coeffs: vec![(1, [0.5, 0.0]), (-1, [0.5, 0.0])] };
        let v = riesz.value([3.0, 4.0]);
        assert!((v - Complex64::new(0.0, -0.6)).norm() < 1e-14);
    }

    #[test]
    fn half_plane_limit_is_exact_on_separated_spectrum() {
        let dk = 2.0 * PI / 16.0;
        // Plane waves with ξ·ω ≤ −1 and |ξ| ≤ B = 4.
        let omega = Direction([1.0, 0.0]);
        let f = GridField2D::from_fn(64, 16.0, |x, y| {
            let w1 = Complex64::from_polar(1.0, -3.0 * dk * x + dk * y);
            let w2 = Complex64::from_polar(0.5, -8.0 * dk * x - 2.0 * dk * y);
            w1 + w2
        })
        .unwrap();
        let errs = ball_to_halfplane_limit(&f, omega, 6, 2.0).unwrap();
        for (k, e) in errs.iter().enumerate() {
            if 2f64.powi(k as i32 + 1) >= 16.0 {
                assert!(*e < 1e-10, "k={} err={e}", k + 1);
            }
        }
        let zero = ball_to_halfplane_limit(&GridField2D::zeros(32, 4.0).unwrap(), omega, 3, 2.0).unwrap();
        assert!(zero.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn meyer_and_singular_guards() {
        assert!(meyer_vector_test(&[], &[], 2.0).is_err());
        let z = GridField2D::zeros(32, 4.0).unwrap();
        assert_eq!(meyer_vector_test(&[Direction([1.0, 0.0])], &[z.clone()], 2.0).unwrap(), None);
        let stats = singular_integral_test(&[], 2.0, &[bump()]).unwrap();
        assert_eq!(stats.max, 0.0);
    }

    #[test]
    fn zero_field_rejects_the_fit() {
        let z = GridField2D::zeros(64, 32.0).unwrap();
        let res = decay_profile(&z, (2.0, 6.0), &[2.0], 8.0).unwrap();
        assert!(res.slope.is_none());
        assert!(cube_decay_experiment(64, 16.0, (2.0, 10.0), &[2.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = gaussian_bump(32, 4.0, [0.0, 0.0], 0.5).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(GridField2D::read_csv(buf.as_slice(), 32, 4.0).unwrap(), f);
    }
}
