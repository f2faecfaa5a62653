//! Hardy–Littlewood maximal functions on grids and the universal Kakeya
//! maximal function on radial functions.
//!
//! For radial `f`, a segment through `x` with `|x| = ρ` lies on a line at
//! distance `u ≤ ρ` from the origin. In the chord coordinate `c` along that
//! line, `f = f_rad(√(u² + c²))` and `x` sits at `c₀ = √(ρ² − u²)`. So the
//! supremum over segments is a supremum over `(u, c₁ ≤ c₀ ≤ c₂)`.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::grid::{RadialGrid, RadialProfile};
use crate::scalar::Real;

fn prefix_sums<T: Real>(samples: &[T]) -> Vec<T> {
    let mut s = Vec::with_capacity(samples.len() + 1);
    s.push(T::zero());
    let mut acc = T::zero();
    for &v in samples {
        acc += v;
        s.push(acc);
    }
    s
}

/// Largest mean of `samples[a..=b]` over all `a ≤ point ≤ b`.
pub fn hl_max_1d<T: Real>(samples: &[T], point: usize) -> T {
    assert!(point < samples.len(), "point outside the grid");
    let s = prefix_sums(samples);
    let mut best = samples[point];
    for a in 0..=point {
        for b in point..samples.len() {
            let avg = (s[b + 1] - s[a]) / T::from_usize_lossy(b - a + 1);
            if avg > best {
                best = avg;
            }
        }
    }
    best
}

/// [`hl_max_1d`] at every point in `O(N²)` total: for each left end, a suffix
/// maximum over right ends is swept into the points it covers.
pub fn hl_max_1d_all<T: Real>(samples: &[T]) -> Vec<T> {
    let n = samples.len();
    let s = prefix_sums(samples);
    let mut out = samples.to_vec();
    let mut suffix = vec![T::zero(); n];
    for a in 0..n {
        let mut run = T::neg_infinity();
        for b in (a..n).rev() {
            let avg = (s[b + 1] - s[a]) / T::from_usize_lossy(b - a + 1);
            if avg > run {
                run = avg;
            }
            suffix[b] = run;
        }
        for i in a..n {
            if suffix[i] > out[i] {
                out[i] = suffix[i];
            }
        }
    }
    out
}

/// Discretization of one evaluation of the radial Kakeya maximal function.
#[derive(Debug, Clone)]
pub struct MaximalQuery {
    pub profile: RadialProfile<f64>,
    pub rho: f64,
    /// Number of line distances `u` (uniform on `[0, ρ]`) and the number of
    /// candidate chord endpoints kept on each side of `c₀`.
    pub resolution: (usize, usize),
}

pub const DEFAULT_RESOLUTION: (usize, usize) = (64, 4096);

impl MaximalQuery {
    pub fn new(profile: RadialProfile<f64>, rho: f64, resolution: (usize, usize)) -> Result<Self> {
        if resolution.0 < 32 || resolution.1 < 32 {
            return param("resolution counts must be at least 32");
        }
        if !(rho >= 0.0 && rho <= 0.5 * profile.grid().r_max()) {
            return param(format!("rho = {rho} must lie in [0, r_max/2]"));
        }
        Ok(Self { profile, rho, resolution })
    }
}

/// Smallest gap between consecutive profile nodes: the chord spacing.
fn chord_spacing(grid: &RadialGrid<f64>) -> f64 {
    grid.nodes().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Largest slope `(P_b − P_a)/(x_b − x_a)` with `a` from `left` and `b` from
/// `right`, every left abscissa lying at or before every right one and the
/// shared point excluded as a pair.
fn max_cross_slope(left: &[(f64, f64)], right: &[(f64, f64)]) -> f64 {
    // Lower convex hull of the left points, in increasing x.
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(left.len());
    for &p in left {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut best = f64::NEG_INFINITY;
    for &b in right {
        let slope = |a: (f64, f64)| if b.0 > a.0 { (b.1 - a.1) / (b.0 - a.0) } else { f64::NEG_INFINITY };
        // The slope to b is unimodal along the lower hull.
        let (mut lo, mut hi) = (0usize, hull.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if slope(hull[mid + 1]) >= slope(hull[mid]) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        best = best.max(slope(hull[lo]));
    }
    best
}

/// Discrete supremum of segment averages of `|f|` through a point at radius
/// `ρ`; a lower bound that grows under refinement of `resolution`.
///
/// Chord integrals use the trapezoid rule on a `c`-grid anchored at `c₀` with
/// the profile's finest node spacing. Endpoints are every `2^j`-th chord node,
/// with `2^j` the smallest power of two leaving at most `n_c` candidates per
/// side, plus `c₀` and the two far ends.
pub fn universal_kakeya_radial(q: &MaximalQuery) -> f64 {
    let grid = q.profile.grid();
    let r_max = grid.r_max();
    let dc = chord_spacing(grid);
    let (n_u, n_c) = q.resolution;
    let rho = q.rho;
    let f = |r: f64| q.profile.eval(r).norm();
    let mut best = f(rho);
    for i in 0..=n_u {
        let u = rho * i as f64 / n_u as f64;
        let c0 = (rho * rho - u * u).max(0.0).sqrt();
        let c_max = (r_max * r_max - u * u).sqrt();
        let j_left = ((c0 + c_max) / dc).floor() as usize;
        let j_right = ((c_max - c0) / dc).floor() as usize;
        let total = j_left + j_right + 1;
        let mut prefix = Vec::with_capacity(total);
        let mut acc = 0.0;
        let mut prev = f((u * u + (c0 - j_left as f64 * dc).powi(2)).sqrt());
        prefix.push(acc);
        for idx in 1..total {
            let c = c0 + (idx as f64 - j_left as f64) * dc;
            let v = f((u * u + c * c).sqrt());
            acc += 0.5 * dc * (prev + v);
            prefix.push(acc);
            prev = v;
        }
        let pick = |side: usize| -> usize {
            let mut stride = 1usize;
            while side / stride > n_c {
                stride *= 2;
            }
            stride
        };
        let at = |idx: usize| ((idx as f64 - j_left as f64) * dc, prefix[idx]);
        let (sl, sr) = (pick(j_left), pick(j_right));
        let mut left: Vec<usize> = (0..=j_left / sl).map(|m| j_left - m * sl).collect();
        if *left.last().unwrap() != 0 {
            left.push(0);
        }
        left.reverse();
        let mut right: Vec<usize> = (0..=j_right / sr).map(|m| j_left + m * sr).collect();
        if *right.last().unwrap() != total - 1 {
            right.push(total - 1);
        }
        let lp: Vec<(f64, f64)> = left.into_iter().map(at).collect();
        let rp: Vec<(f64, f64)> = right.into_iter().map(at).collect();
        best = best.max(max_cross_slope(&lp, &rp));
    }
    best
}

/// `𝒰f` at every node of `rho_grid`.
pub fn kakeya_profile(profile: &RadialProfile<f64>, rho_grid: &[f64], resolution: (usize, usize)) -> Result<Vec<f64>> {
    rho_grid
        .par_iter()
        .map(|&rho| Ok(universal_kakeya_radial(&MaximalQuery::new(profile.clone(), rho, resolution)?)))
        .collect()
}

/// `(∫|g|^p r^{n−1} dr)^{1/p}` by the grid's trapezoid weights.
pub fn radial_lp_norm(grid: &RadialGrid<f64>, values: &[f64], p: f64, n: u32) -> f64 {
    let s: f64 = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(values)
        .map(|((&r, &w), &v)| w * v.abs().powf(p) * r.powi(n as i32 - 1))
        .sum();
    s.powf(1.0 / p)
}

/// Measure of `{𝒰f > λ}` under `r^{n−1}dr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSetReport {
    pub lambda: f64,
    pub measure: f64,
    pub n: u32,
}

/// Level-set measures of sampled values; node weights are the trapezoid
/// weights times `r^{n−1}`.
pub fn level_sets(grid: &RadialGrid<f64>, values: &[f64], lambdas: &[f64], n: u32) -> Result<Vec<LevelSetReport>> {
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return param("levels must be positive");
    }
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let measure = grid
                .nodes()
                .iter()
                .zip(grid.weights())
                .zip(values)
                .filter(|(_, &v)| v > lambda)
                .map(|((&r, &w), _)| w * r.powi(n as i32 - 1))
                .sum();
            LevelSetReport { lambda, measure, n }
        })
        .collect())
}

/// The blow-up witness `r^{−n/p} χ_{[δ,1]}` on a uniform grid over `[0, r_max]`.
pub fn sharpness_profile(delta: f64, p: f64, n: u32, r_max: f64, h: f64) -> Result<RadialProfile<f64>> {
    if !(delta > 0.0 && delta < 1.0) {
        return param("delta must lie in (0, 1)");
    }
    let grid = Arc::new(RadialGrid::uniform(0.0, r_max, (r_max / h).round() as usize + 1)?);
    let e = f64::from(n) / p;
    Ok(RadialProfile::from_real_fn(grid, move |r| if r >= delta && r <= 1.0 { r.powf(-e) } else { 0.0 }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KakeyaRow {
    pub n: u32,
    pub p: f64,
    pub delta: f64,
    pub norm_f: f64,
    pub norm_uf: f64,
    /// `None` when `f` vanishes.
    pub ratio: Option<f64>,
    pub resolution: (usize, usize),
}

/// `‖𝒰f‖_p / ‖f‖_p` under `r^{n−1}dr` for each `(δ, f_δ)`; `𝒰f` is sampled
/// on a grid over `[0, r_max/2]` that is uniform with step `h/2` up to 2δ
/// and geometric beyond.
pub fn kakeya_lp_scan(
    family: &[(f64, RadialProfile<f64>)],
    p: f64,
    n: u32,
    resolution: (usize, usize),
) -> Result<Vec<KakeyaRow>> {
    if !(p > 1.0) || n < 2 {
        return param("need p > 1 and n >= 2");
    }
    family
        .iter()
        .map(|(delta, f)| {
            let grid = f.grid();
            let norm_f = radial_lp_norm(grid, &f.abs_values(), p, n);
            if norm_f == 0.0 {
                return Ok(KakeyaRow { n, p, delta: *delta, norm_f, norm_uf: 0.0, ratio: None, resolution });
            }
            let rho_grid = rho_nodes(*delta, 0.5 * grid.r_max(), chord_spacing(grid))?;
            let uf = kakeya_profile(f, rho_grid.nodes(), resolution)?;
            let norm_uf = radial_lp_norm(&rho_grid, &uf, p, n);
            Ok(KakeyaRow { n, p, delta: *delta, norm_f, norm_uf, ratio: Some(norm_uf / norm_f), resolution })
        })
        .collect()
}

fn rho_nodes(delta: f64, rho_max: f64, h: f64) -> Result<RadialGrid<f64>> {
    let lin_end = (2.0 * delta).min(rho_max);
    let step = 0.5 * h;
    let mut nodes: Vec<f64> = (0..).map(|k| k as f64 * step).take_while(|&r| r < lin_end).collect();
    let ratio: f64 = 1.03;
    let mut r = lin_end;
    while r < rho_max {
        nodes.push(r);
        r *= ratio;
    }
    nodes.push(rho_max);
    RadialGrid::from_nodes(nodes)
}

/// Radial-direction maximal function: along each ray the line through the
/// origin carries `f(|t|)`, so `Mf(r)` is the 1D maximal function of the
/// even extension at `t = r`. Returns `‖Mf‖_p/‖f‖_p` under `r^{n−1}dr` on a
/// uniform grid (`None` for a vanishing profile).
pub fn radial_field_max_test(profile: &RadialProfile<f64>, p: f64, n: u32) -> Result<Option<f64>> {
    if !(p > 1.0) {
        return param("p must exceed 1");
    }
    let grid = profile.grid();
    let h = chord_spacing(grid);
    let count = (grid.r_max() / h).round() as usize;
    let half: Vec<f64> = (0..=count).map(|k| profile.eval(k as f64 * h).norm()).collect();
    let mut line: Vec<f64> = half[1..].iter().rev().copied().collect();
    line.extend_from_slice(&half);
    let m = hl_max_1d_all(&line);
    let mf = &m[count..];
    let uniform = RadialGrid::uniform(0.0, count as f64 * h, count + 1)?;
    let den = radial_lp_norm(&uniform, &half, p, n);
    if den == 0.0 {
        return Ok(None);
    }
    Ok(Some(radial_lp_norm(&uniform, mf, p, n) / den))
}

pub fn write_kakeya_csv<W: Write>(rows: &[KakeyaRow], mut w: W) -> Result<()> {
    writeln!(w, "n,p,delta,norm_f,norm_Uf,ratio,resolution")?;
    for r in rows {
        let ratio = r.ratio.map_or_else(|| "nan".to_string(), |v| format!("{v:.12e}"));
        writeln!(
            w,
            "{},{},{},{:.12e},{:.12e},{},{}x{}",
            r.n, r.p, r.delta, r.norm_f, r.norm_uf, ratio, r.resolution.0, r.resolution.1
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indicator(r_max: f64, h: f64) -> RadialProfile<f64> {
        let grid = Arc::new(RadialGrid::uniform(0.0, r_max, (r_max / h).round() as usize + 1).unwrap());
        RadialProfile::from_real_fn(grid, |r| if r <= 1.0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn hl_max_examples() {
        let h = 1.0 / 64.0;
        let xs: Vec<f64> = (0..=512).map(|k| -4.0 + k as f64 * h).collect();
        let f: Vec<f64> = xs.iter().map(|&x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }).collect();
        let at2 = xs.iter().position(|&x| x == 2.0).unwrap();
        assert!((hl_max_1d(&f, at2) - 0.5).abs() < 0.01);
        let inside = xs.iter().position(|&x| x == 0.5).unwrap();
        assert_eq!(hl_max_1d(&f, inside), 1.0);
        assert_eq!(hl_max_1d(&[3.0f64; 40], 17), 3.0);
        let all = hl_max_1d_all(&f);
        for i in (0..f.len()).step_by(37) {
            assert_eq!(all[i], hl_max_1d(&f, i));
        }
    }

    #[test]
    fn hl_max_generic_f32() {
        let v: Vec<f32> = vec![0.0, 1.0, 0.0, 0.0];
        assert!((hl_max_1d(&v, 3) - 1.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn kakeya_of_the_unit_ball_indicator() {
        let f = indicator(4.0, 1.0 / 512.0);
        let q = MaximalQuery::new(f.clone(), 2.0, DEFAULT_RESOLUTION).unwrap();
        let v = universal_kakeya_radial(&q);
        assert!((v - 2.0 / 3.0).abs() < 1e-3, "{v}");
        let inside = universal_kakeya_radial(&MaximalQuery::new(f.clone(), 0.5, (32, 32)).unwrap());
        assert!((inside - 1.0).abs() < 1e-12);
        assert!(MaximalQuery::new(f, 2.5, (32, 32)).is_err());
    }

    #[test]
    fn refinement_never_decreases() {
        let f = indicator(4.0, 1.0 / 128.0);
        for rho in [0.7, 1.3, 1.9] {
            let coarse = universal_kakeya_radial(&MaximalQuery::new(f.clone(), rho, (32, 32)).unwrap());
            let fine = universal_kakeya_radial(&MaximalQuery::new(f.clone(), rho, (64, 64)).unwrap());
            assert!(fine >= coarse, "rho={rho}: {fine} < {coarse}");
        }
    }

    #[test]
    fn radial_field_constant_profile() {
        let grid = Arc::new(RadialGrid::uniform(0.0, 2.0, 129).unwrap());
        let f = RadialProfile::from_real_fn(grid.clone(), |_| 2.0);
        let ratio = radial_field_max_test(&f, 3.0, 2).unwrap().unwrap();
        assert!((ratio - 1.0).abs() < 1e-12);
        assert_eq!(radial_field_max_test(&RadialProfile::zeros(grid), 3.0, 2).unwrap(), None);
    }

    #[test]
    fn empty_family_member_is_flagged() {
        let grid = Arc::new(RadialGrid::uniform(0.0, 2.0, 65).unwrap());
        let rows = kakeya_lp_scan(&[(0.25, RadialProfile::zeros(grid))], 3.0, 2, (32, 32)).unwrap();
        assert_eq!(rows[0].ratio, None);
    }

    #[test]
    fn level_sets_shrink() {
        let grid = RadialGrid::uniform(0.0, 1.0, 11).unwrap();
        let vals: Vec<f64> = grid.nodes().iter().map(|r| 1.0 - r).collect();
        let rep = level_sets(&grid, &vals, &[0.1, 0.5, 0.9], 2).unwrap();
        assert!(rep[0].measure >= rep[1].measure && rep[1].measure >= rep[2].measure);
    }
}
