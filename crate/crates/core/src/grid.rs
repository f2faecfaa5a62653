//! Radial grids, trapezoid quadrature, sampled profiles and mixed norms.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{param, LabError, Result};
use crate::scalar::Real;

/// How the nodes of a [`RadialGrid`] were laid out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridScheme {
    Linear,
    /// Uniform on `[0, r_lin]`, geometric on `[r_lin, r_max]`.
    Hybrid { r_lin: f64 },
    /// Arbitrary increasing nodes supplied by the caller.
    Custom,
}

/// Strictly increasing radii with composite trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid<T: Real> {
    nodes: Vec<T>,
    weights: Vec<T>,
    scheme: GridScheme,
}

impl<T: Real> RadialGrid<T> {
    /// Builds a grid on `[0, r_max]`. `r_lin` is only read by the hybrid scheme.
    pub fn make(scheme: GridScheme, r_max: T, count: usize) -> Result<Self> {
        if !(r_max > T::zero()) || !r_max.is_finite() {
            return param("r_max must be positive and finite");
        }
        if count < 16 {
            return param(format!("grid needs at least 16 nodes, got {count}"));
        }
        let nodes = match scheme {
            GridScheme::Linear => linspace(T::zero(), r_max, count),
            GridScheme::Hybrid { r_lin } => {
                let r_lin = T::lit(r_lin);
                if !(r_lin > T::zero() && r_lin < r_max) {
                    return param("hybrid grid needs 0 < r_lin < r_max");
                }
                // Half the nodes go to the linear part; the geometric part
                // continues from r_lin without repeating it.
                let n_lin = count / 2;
                let n_geo = count - n_lin;
                let mut nodes = linspace(T::zero(), r_lin, n_lin);
                let ratio = (r_max / r_lin).powf(T::one() / T::from_usize_lossy(n_geo));
                let mut r = r_lin;
                for i in 0..n_geo {
                    r = r * ratio;
                    nodes.push(if i + 1 == n_geo { r_max } else { r });
                }
                nodes
            }
            GridScheme::Custom => return param("custom grids are built with RadialGrid::from_nodes"),
        };
        Self::with_scheme(nodes, scheme)
    }

    /// Uniform grid on `[start, end]` with `count` nodes; `start` may be positive.
    pub fn uniform(start: T, end: T, count: usize) -> Result<Self> {
        if count < 2 || !(end > start) || start < T::zero() {
            return param("uniform grid needs 0 <= start < end and at least two nodes");
        }
        let scheme = if start == T::zero() { GridScheme::Linear } else { GridScheme::Custom };
        Self::with_scheme(linspace(start, end, count), scheme)
    }

    pub fn from_nodes(nodes: Vec<T>) -> Result<Self> {
        Self::with_scheme(nodes, GridScheme::Custom)
    }

    fn with_scheme(nodes: Vec<T>, scheme: GridScheme) -> Result<Self> {
        if nodes.len() < 2 {
            return param("grid needs at least two nodes");
        }
        if nodes[0] < T::zero() || nodes.iter().any(|x| !x.is_finite()) {
            return param("grid nodes must be finite and nonnegative");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return param("grid nodes must be strictly increasing");
        }
        let weights = trapezoid_weights(&nodes);
        Ok(Self { nodes, weights, scheme })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_min(&self) -> T {
        self.nodes[0]
    }

    pub fn r_max(&self) -> T {
        *self.nodes.last().expect("grid is nonempty")
    }

    /// Trapezoid quadrature of node values.
    pub fn integrate(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.nodes.len());
        self.weights.iter().zip(values).map(|(&w, &v)| w * v).sum()
    }

    /// Trapezoid quadrature of `f(r)` sampled at the nodes.
    pub fn integrate_fn(&self, f: impl Fn(T) -> T) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&r, &w)| w * f(r)).sum()
    }

    /// Index `i` with `nodes[i] <= r <= nodes[i+1]`, clamped to the grid.
    pub fn locate(&self, r: T) -> usize {
        let n = self.nodes.len();
        if r <= self.nodes[0] {
            return 0;
        }
        if r >= self.nodes[n - 1] {
            return n - 2;
        }
        let pos = self.nodes.partition_point(|&x| x <= r);
        (pos - 1).min(n - 2)
    }
}

fn linspace<T: Real>(a: T, b: T, count: usize) -> Vec<T> {
    let step = (b - a) / T::from_usize_lossy(count - 1);
    (0..count)
        .map(|i| if i + 1 == count { b } else { a + step * T::from_usize_lossy(i) })
        .collect()
}

fn trapezoid_weights<T: Real>(nodes: &[T]) -> Vec<T> {
    let n = nodes.len();
    let half = T::lit(0.5);
    (0..n)
        .map(|i| {
            let left = if i > 0 { nodes[i] - nodes[i - 1] } else { T::zero() };
            let right = if i + 1 < n { nodes[i + 1] - nodes[i] } else { T::zero() };
            half * (left + right)
        })
        .collect()
}

/// Complex samples on a shared grid, interpolated piecewise linearly.
#[derive(Debug, Clone)]
pub struct RadialProfile<T: Real> {
    grid: Arc<RadialGrid<T>>,
    values: Vec<Complex<T>>,
}

impl<T: Real> RadialProfile<T> {
    pub fn new(grid: Arc<RadialGrid<T>>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::Structure(format!(
                "profile has {} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return param("profile samples must be finite");
        }
        Ok(Self { grid, values })
    }

    pub fn from_real_fn(grid: Arc<RadialGrid<T>>, f: impl Fn(T) -> T) -> Self {
        let values = grid.nodes().iter().map(|&r| Complex::new(f(r), T::zero())).collect();
        Self { grid, values }
    }

    /// Real samples given by node index.
    pub fn from_real_fn_indexed(grid: Arc<RadialGrid<T>>, f: impl Fn(usize) -> T) -> Self {
        let values = (0..grid.len()).map(|i| Complex::new(f(i), T::zero())).collect();
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<RadialGrid<T>>, f: impl Fn(T) -> Complex<T>) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid<T>>) -> Self {
        let values = vec![Complex::new(T::zero(), T::zero()); grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn abs_values(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Piecewise-linear evaluation; zero outside `[r_min, r_max]`.
    pub fn eval(&self, r: T) -> Complex<T> {
        let nodes = self.grid.nodes();
        if r < nodes[0] || r > self.grid.r_max() {
            return Complex::new(T::zero(), T::zero());
        }
        let i = self.grid.locate(r);
        let (a, b) = (nodes[i], nodes[i + 1]);
        if r == a {
            return self.values[i];
        }
        if r == b {
            return self.values[i + 1];
        }
        let s = (r - a) / (b - a);
        self.values[i] * (T::one() - s) + self.values[i + 1] * s
    }

    pub fn scale(&self, c: T) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,re,im")?;
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", r.f64(), v.re.f64(), v.im.f64())?;
        }
        Ok(())
    }

    /// Reads the `r,re,im` format back; the grid is rebuilt from the radii.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                if line.trim() != "r,re,im" {
                    return Err(LabError::Parse(format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(LabError::Parse(format!("line {}: expected 3 columns", lineno + 1)));
            }
            let num = |s: &str| -> Result<T> {
                let x: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| LabError::Parse(format!("line {}: bad number {s:?}", lineno + 1)))?;
                Ok(T::lit(x))
            };
            nodes.push(num(cols[0])?);
            values.push(Complex::new(num(cols[1])?, num(cols[2])?));
        }
        let grid = Arc::new(RadialGrid::from_nodes(nodes)?);
        Self::new(grid, values)
    }
}

/// Spherical-harmonic label (degree `k`, multiplicity index `l`) in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex {
    pub k: u32,
    pub l: u32,
    pub n: u32,
}

impl ModeIndex {
    pub fn new(n: u32, k: u32, l: u32) -> Result<Self> {
        if n < 2 {
            return param("dimension must be at least 2");
        }
        let d = harmonic_dimension(n, k);
        if l == 0 || u64::from(l) > d {
            return param(format!("multiplicity index {l} outside 1..={d} for n={n}, k={k}"));
        }
        Ok(Self { k, l, n })
    }
}

/// Dimension `d_k` of degree-`k` spherical harmonics on the sphere in R^n.
pub fn harmonic_dimension(n: u32, k: u32) -> u64 {
    let binom = |a: i64, b: i64| -> u64 {
        if a < 0 || b < 0 || b > a {
            return 0;
        }
        let b = b.min(a - b);
        let mut acc: u128 = 1;
        for i in 0..b {
            acc = acc * (a - i) as u128 / (i + 1) as u128;
        }
        acc as u64
    };
    let (n, k) = (i64::from(n), i64::from(k));
    binom(n + k - 1, k) - binom(n + k - 3, k - 2)
}

/// A function written as `Σ f^l_k(|x|) Y^l_k(x/|x|)` with orthonormal harmonics.
#[derive(Debug, Clone)]
pub struct ModeFunction<T: Real> {
    n: u32,
    modes: BTreeMap<ModeIndex, RadialProfile<T>>,
}

impl<T: Real> ModeFunction<T> {
    pub fn new(n: u32) -> Self {
        Self { n, modes: BTreeMap::new() }
    }

    pub fn single(index: ModeIndex, profile: RadialProfile<T>) -> Self {
        let mut f = Self::new(index.n);
        f.modes.insert(index, profile);
        f
    }

    pub fn insert(&mut self, index: ModeIndex, profile: RadialProfile<T>) -> Result<()> {
        if index.n != self.n {
            return Err(LabError::Structure(format!("mode for n={} added to n={}", index.n, self.n)));
        }
        if let Some(first) = self.modes.values().next() {
            if !same_grid(first.grid(), profile.grid()) {
                return Err(LabError::Structure("all modes must share one grid".into()));
            }
        }
        self.modes.insert(index, profile);
        Ok(())
    }

    pub fn dimension(&self) -> u32 {
        self.n
    }

    pub fn modes(&self) -> &BTreeMap<ModeIndex, RadialProfile<T>> {
        &self.modes
    }

    /// Angular L² norm at each node: `(Σ |f^l_k(r)|²)^{1/2}`.
    pub fn angular_l2(&self) -> Result<Vec<T>> {
        let mut iter = self.modes.values();
        let first = iter.next().ok_or_else(|| LabError::Parameter("empty mode function".into()))?;
        let mut acc: Vec<T> = first.values().iter().map(|v| v.norm_sqr()).collect();
        for p in iter {
            if !same_grid(first.grid(), p.grid()) {
                return Err(LabError::Structure("modes live on different grids".into()));
            }
            for (a, v) in acc.iter_mut().zip(p.values()) {
                *a += v.norm_sqr();
            }
        }
        Ok(acc.into_iter().map(|s| s.sqrt()).collect())
    }

    pub fn grid(&self) -> Option<&Arc<RadialGrid<T>>> {
        self.modes.values().next().map(|p| p.grid())
    }
}

fn same_grid<T: Real>(a: &Arc<RadialGrid<T>>, b: &Arc<RadialGrid<T>>) -> bool {
    Arc::ptr_eq(a, b) || a.nodes() == b.nodes()
}

/// Exponents for a mixed-norm evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub p: f64,
    pub q: Option<f64>,
    pub s: Option<f64>,
    pub s_prime: Option<f64>,
    pub n: u32,
}

impl NormParams {
    pub fn new(p: f64, n: u32) -> Result<Self> {
        let params = Self { p, q: None, s: None, s_prime: None, n };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return param(format!("radial exponent must lie in (1, inf), got {}", self.p));
        }
        if self.n < 2 {
            return param("dimension must be at least 2");
        }
        if let (Some(s), Some(sp)) = (self.s, self.s_prime) {
            if (1.0 / s + 1.0 / sp - 1.0).abs() > 1e-12 {
                return param("s and s' are not conjugate");
            }
        }
        if let Some(q) = self.q {
            if (2.0 / self.p + 1.0 / q - 1.0).abs() > 1e-12 {
                return param("q must satisfy 2/p + 1/q = 1");
            }
        }
        Ok(())
    }
}

/// `(∫ (Σ|f^l_k(r)|²)^{p/2} r^{n-1} dr)^{1/p}` on the grid of `f`.
pub fn mixed_norm<T: Real>(f: &ModeFunction<T>, params: &NormParams) -> Result<T> {
    params.validate()?;
    if f.dimension() != params.n {
        return Err(LabError::Structure("norm dimension differs from the mode function".into()));
    }
    let amp = f.angular_l2()?;
    let grid = f.grid().expect("nonempty after angular_l2");
    let p = T::lit(params.p);
    let e = T::from_u32(params.n - 1).unwrap();
    let integrand: Vec<T> =
        amp.iter().zip(grid.nodes()).map(|(&a, &r)| a.powf(p) * r.powf(e)).collect();
    Ok(grid.integrate(&integrand).powf(T::one() / p))
}

/// Result of [`weighted_lp_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNorm<T> {
    pub value: T,
    /// Set when `r^α` is not integrable at the origin and `g(0) ≠ 0`.
    pub divergent: bool,
}

/// `(∫ |g(r)|^p r^α dr)^{1/p}`.
///
/// For α < 0 the node at r = 0 is given weight zero; when α ≤ −1 and
/// `g(0) ≠ 0` the integral is infinite and the result is flagged.
pub fn weighted_lp_norm<T: Real>(g: &RadialProfile<T>, p: T, alpha: T) -> Result<WeightedNorm<T>> {
    if !(p >= T::one()) {
        return param("weighted norm needs p >= 1");
    }
    let grid = g.grid();
    let integrand: Vec<T> = g
        .values()
        .iter()
        .zip(grid.nodes())
        .map(|(v, &r)| {
            if r == T::zero() {
                if alpha == T::zero() {
                    v.norm().powf(p)
                } else {
                    T::zero()
                }
            } else {
                v.norm().powf(p) * r.powf(alpha)
            }
        })
        .collect();
    let divergent =
        alpha <= -T::one() && grid.r_min() == T::zero() && g.values()[0].norm() > T::zero();
    Ok(WeightedNorm { value: grid.integrate(&integrand).powf(T::one() / p), divergent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lin(r_max: f64, count: usize) -> Arc<RadialGrid<f64>> {
        Arc::new(RadialGrid::make(GridScheme::Linear, r_max, count).unwrap())
    }

    #[test]
    fn linear_grid_nodes_and_weights() {
        let g = lin(1.0, 17);
        assert_eq!(g.nodes()[1], 1.0 / 16.0);
        assert_eq!(g.r_max(), 1.0);
        assert_relative_eq!(g.weights().iter().sum::<f64>(), 1.0, max_relative = 1e-12);
        assert_eq!(g.integrate_fn(|r| r), 0.5);
    }

    #[test]
    fn trapezoid_on_square() {
        let g = lin(1.0, 1025);
        assert!((g.integrate_fn(|r| r * r) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn hybrid_grid_is_increasing_and_ends_at_r_max() {
        let g = RadialGrid::<f64>::make(GridScheme::Hybrid { r_lin: 2.0 }, 50.0, 64).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.r_max(), 50.0);
        assert!(g.weights().iter().all(|&w| w > 0.0));
        assert_relative_eq!(g.integrate_fn(|_| 1.0), 50.0, max_relative = 1e-12);
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(RadialGrid::<f64>::make(GridScheme::Linear, 1.0, 8).is_err());
        assert!(RadialGrid::<f64>::make(GridScheme::Linear, -1.0, 32).is_err());
        assert!(RadialGrid::<f64>::make(GridScheme::Hybrid { r_lin: 3.0 }, 1.0, 32).is_err());
        assert!(RadialGrid::<f64>::from_nodes(vec![0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn harmonic_dimensions() {
        assert_eq!(harmonic_dimension(2, 0), 1);
        assert_eq!(harmonic_dimension(2, 5), 2);
        assert_eq!(harmonic_dimension(3, 2), 5);
        assert_eq!(harmonic_dimension(4, 3), 16);
        assert!(ModeIndex::new(2, 3, 3).is_err());
    }

    #[test]
    fn profile_eval_hits_nodes_exactly() {
        let g = lin(2.0, 33);
        let p = RadialProfile::from_real_fn(g.clone(), |r| (3.0 * r).sin());
        for (r, v) in g.nodes().iter().zip(p.values()) {
            assert_eq!(p.eval(*r), *v);
        }
        assert_eq!(p.eval(5.0).re, 0.0);
    }

    #[test]
    fn mixed_norm_of_indicator() {
        let g = lin(2.0, 2049);
        let f = RadialProfile::from_real_fn(g, |r| if r <= 1.0 { 1.0 } else { 0.0 });
        let mf = ModeFunction::single(ModeIndex::new(2, 0, 1).unwrap(), f);
        let v = mixed_norm(&mf, &NormParams::new(2.0, 2).unwrap()).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn dilation_scaling() {
        let g = lin(12.0, 4097);
        let idx = ModeIndex::new(2, 0, 1).unwrap();
        let f = ModeFunction::single(idx, RadialProfile::from_real_fn(g.clone(), |r| (-r * r).exp()));
        let fd = ModeFunction::single(idx, RadialProfile::from_real_fn(g, |r| (-4.0 * r * r).exp()));
        let np = NormParams::new(2.0, 2).unwrap();
        let ratio = mixed_norm(&fd, &np).unwrap() / mixed_norm(&f, &np).unwrap();
        assert!((ratio - 0.5).abs() < 1e-3);
    }

    #[test]
    fn mismatched_grids_are_structural_errors() {
        let mut f = ModeFunction::new(2);
        f.insert(ModeIndex::new(2, 0, 1).unwrap(), RadialProfile::zeros(lin(1.0, 17))).unwrap();
        let err = f.insert(ModeIndex::new(2, 1, 1).unwrap(), RadialProfile::zeros(lin(1.0, 33)));
        assert!(matches!(err, Err(LabError::Structure(_))));
    }

    #[test]
    fn weighted_norm_examples() {
        let g = lin(1.0, 4097);
        let one = RadialProfile::from_real_fn(g.clone(), |_| 1.0);
        let v = weighted_lp_norm(&one, 2.0, 1.0).unwrap();
        assert!((v.value - 0.5f64.sqrt()).abs() < 1e-6);
        let r = RadialProfile::from_real_fn(g.clone(), |r| r);
        assert!((weighted_lp_norm(&r, 2.0, 0.0).unwrap().value - (1.0f64 / 3.0).sqrt()).abs() < 1e-5);
        assert_eq!(weighted_lp_norm(&RadialProfile::zeros(g.clone()), 2.0, 0.0).unwrap().value, 0.0);
        assert!(weighted_lp_norm(&one, 2.0, -1.0).unwrap().divergent);
        assert!(!weighted_lp_norm(&one, 2.0, -0.5).unwrap().divergent);
    }

    #[test]
    fn csv_round_trip() {
        let g = lin(1.0, 17);
        let p = RadialProfile::from_fn(g, |r| Complex::new(r.cos(), r.sin() / 3.0));
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = RadialProfile::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), p.values());
        assert_eq!(back.grid().nodes(), p.grid().nodes());
    }

    #[test]
    fn f32_instantiation() {
        let g = Arc::new(RadialGrid::<f32>::make(GridScheme::Linear, 1.0, 17).unwrap());
        assert!((g.integrate_fn(|r| r) - 0.5).abs() < 1e-6);
    }
}
