//! Brush configurations of tubes in a spherical shell and their overlap.
//!
//! Each tube runs from the outer sphere `|x| = R + Δ` to the inner sphere
//! `|x| = R` along a line tangent to `|x| = R₀` that meets the NS axis (the
//! last coordinate axis). Of the two tangents through an outer point the one
//! heading north is kept. Overlap is measured on a raster.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{param, LabError, Result};
use crate::planar::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellKind {
    Thin,
    Thick,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub n: usize,
    pub r: f64,
    pub delta: f64,
    pub r0: f64,
    pub eps: f64,
}

impl ShellSpec {
    pub fn new(n: usize, r: f64, delta: f64, r0: f64, eps: f64) -> Result<Self> {
        let spec = Self { n, r, delta, r0, eps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != 2 && self.n != 3 {
            return param("shell dimension must be 2 or 3");
        }
        if !(self.r > 0.0 && self.delta > 0.0 && self.eps > 0.0 && self.r0 > 0.0) {
            return param("radii, thickness and tube width must be positive");
        }
        if self.eps > self.delta / 16.0 {
            return param("tube width must be at most delta/16");
        }
        if self.r0 > self.r {
            return Err(LabError::Geometry(format!(
                "tangency radius {} exceeds the inner radius {}: no tangent segment stays in the shell",
                self.r0, self.r
            )));
        }
        Ok(())
    }

    pub fn kind(&self) -> ShellKind {
        if self.delta < 0.5 * self.r {
            ShellKind::Thin
        } else {
            ShellKind::Thick
        }
    }

    pub fn outer(&self) -> f64 {
        self.r + self.delta
    }
}

type P3 = [f64; 3];

fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn norm(a: P3) -> f64 {
    dot(a, a).sqrt()
}
fn axpy(a: P3, t: f64, d: P3) -> P3 {
    [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]]
}
fn cross(a: P3, b: P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// A flat-ended cylinder (a rectangle in the plane) of width `width` around
/// the axis from `outer` to `inner`. Planar tubes have a zero third coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub outer: P3,
    pub inner: P3,
    pub width: f64,
}

impl Tube {
    pub fn length(&self) -> f64 {
        norm(sub(self.inner, self.outer))
    }

    /// Residuals of the outer sphere, inner sphere, tangency and NS-axis
    /// conditions.
    pub fn residuals(&self, spec: &ShellSpec) -> [f64; 4] {
        let d = sub(self.inner, self.outer);
        let len = norm(d);
        let u = [d[0] / len, d[1] / len, d[2] / len];
        let a = self.outer;
        let foot = axpy(a, -dot(a, u), u);
        let axis_gap = if spec.n == 2 {
            // Two lines in the plane meet unless parallel.
            if u[0].abs() > 1e-12 {
                0.0
            } else {
                a[0].abs()
            }
        } else {
            let c = cross(u, [0.0, 0.0, 1.0]);
            let cn = norm(c);
            if cn > 1e-12 {
                dot(a, c).abs() / cn
            } else {
                a[0].hypot(a[1])
            }
        };
        [
            (norm(self.outer) - spec.outer()).abs(),
            (norm(self.inner) - spec.r).abs(),
            (norm(foot) - spec.r0).abs(),
            axis_gap,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeSet {
    pub spec: ShellSpec,
    pub tubes: Vec<Tube>,
}

impl TubeSet {
    pub fn total_volume(&self) -> f64 {
        let cross_section = if self.spec.n == 2 { self.spec.eps } else { PI * 0.25 * self.spec.eps * self.spec.eps };
        self.tubes.iter().map(|t| t.length() * cross_section).sum()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// The tube from the planar point at angle `alpha` on the outer circle, in
/// plane coordinates `(a, z)` with `z` pointing north.
fn planar_tube(spec: &ShellSpec, alpha: f64) -> ([f64; 2], [f64; 2]) {
    let ro = spec.outer();
    let p = [ro * alpha.cos(), ro * alpha.sin()];
    let beta = (spec.r0 / ro).acos();
    let touch = |ang: f64| [spec.r0 * ang.cos(), spec.r0 * ang.sin()];
    let (t_plus, t_minus) = (touch(alpha + beta), touch(alpha - beta));
    let north = |t: [f64; 2]| t[1] - p[1];
    let t = if north(t_plus) >= north(t_minus) - 1e-12 { t_plus } else { t_minus };
    let d = [t[0] - p[0], t[1] - p[1]];
    let len = d[0].hypot(d[1]);
    let u = [d[0] / len, d[1] / len];
    // First crossing of |x| = R along p + s u.
    let b = p[0] * u[0] + p[1] * u[1];
    let c = ro * ro - spec.r * spec.r;
    let s = -b - (b * b - c).max(0.0).sqrt();
    (p, [p[0] + s * u[0], p[1] + s * u[1]])
}

/// Latitude band (in radians from the equator) holding the 3D outer points.
pub const EQUATOR_BAND: f64 = PI / 4.0;

/// Tubes with outer endpoints spaced `ε` apart, so their outer footprints are
/// disjoint. In the plane the outer circle is covered; in space the outer
/// points lie on meridian half-planes within [`EQUATOR_BAND`] of the equator,
/// the meridians spaced so that footprints stay `ε` apart across the band.
pub fn generate_brush(spec: &ShellSpec) -> Result<TubeSet> {
    spec.validate()?;
    let ro = spec.outer();
    let mut tubes = Vec::new();
    if spec.n == 2 {
        let count = (2.0 * PI * ro / spec.eps).floor() as usize;
        for j in 0..count {
            let (p, q) = planar_tube(spec, 2.0 * PI * j as f64 / count as f64);
            tubes.push(Tube { outer: [p[0], p[1], 0.0], inner: [q[0], q[1], 0.0], width: spec.eps });
        }
    } else {
        let meridians = (2.0 * PI * ro * EQUATOR_BAND.cos() / spec.eps).floor() as usize;
        let per_side = (EQUATOR_BAND * ro / spec.eps).floor() as i64;
        for m in 0..meridians {
            let theta = 2.0 * PI * m as f64 / meridians as f64;
            let (c, s) = (theta.cos(), theta.sin());
            for j in -per_side..=per_side {
                let (p, q) = planar_tube(spec, j as f64 * spec.eps / ro);
                tubes.push(Tube {
                    outer: [p[0] * c, p[0] * s, p[1]],
                    inner: [q[0] * c, q[0] * s, q[1]],
                    width: spec.eps,
                });
            }
        }
    }
    Ok(TubeSet { spec: *spec, tubes })
}

/// Cells allowed in one raster.
pub const MAX_CELLS: u64 = 1 << 28;

/// Overlap counts on the cube `[−(R+Δ+ε), R+Δ+ε]ⁿ` with cell spacing `h`.
#[derive(Debug, Clone)]
pub struct OverlapRaster {
    pub n: usize,
    pub h: f64,
    pub side: usize,
    pub origin: f64,
    pub counts: Vec<u16>,
    /// Raster cells covered by each tube.
    pub tube_cells: Vec<u64>,
}

impl OverlapRaster {
    fn center(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.h
    }

    pub fn histogram(&self) -> OverlapHistogram {
        let max = self.counts.iter().copied().max().unwrap_or(0) as usize;
        let mut exact = vec![0u64; max + 1];
        for &c in &self.counts {
            exact[c as usize] += 1;
        }
        let cell = self.h.powi(self.n as i32);
        let mut measures = vec![0.0; max];
        let mut acc = 0u64;
        for d in (1..=max).rev() {
            acc += exact[d];
            measures[d - 1] = acc as f64 * cell;
        }
        OverlapHistogram { n: self.n, measures }
    }

    /// Largest count among cells whose centers lie within `h/2` of `|x| = r`.
    pub fn sphere_max(&self, r: f64) -> u16 {
        let s = self.side;
        let half = 0.5 * self.h;
        let mut best = 0;
        for (idx, &c) in self.counts.iter().enumerate() {
            if c <= best {
                continue;
            }
            let (i, j, k) = (idx % s, (idx / s) % s, idx / (s * s));
            let (x, y) = (self.center(i), self.center(j));
            let z = if self.n == 3 { self.center(k) } else { 0.0 };
            if ((x * x + y * y + z * z).sqrt() - r).abs() <= half {
                best = c;
            }
        }
        best
    }
}

/// Counts, cell by cell, how many tubes contain the cell center.
pub fn rasterize(tubes: &TubeSet, h: f64) -> Result<OverlapRaster> {
    let spec = &tubes.spec;
    if !(h > 0.0 && h <= spec.eps / 4.0) {
        return param("raster spacing must satisfy 0 < h <= eps/4");
    }
    let half_side = spec.outer() + spec.eps;
    let side = (2.0 * half_side / h).ceil() as usize;
    let n = spec.n;
    if (side as u64).pow(n as u32) > MAX_CELLS {
        return param(format!("raster of {side}^{n} cells exceeds the 2^28 cap"));
    }
    let mut raster = OverlapRaster {
        n,
        h,
        side,
        origin: -half_side,
        counts: vec![0u16; side.pow(n as u32)],
        tube_cells: Vec::with_capacity(tubes.tubes.len()),
    };
    for tube in &tubes.tubes {
        let cells = stamp(&mut raster, tube)?;
        raster.tube_cells.push(cells);
    }
    Ok(raster)
}

/// Adds one tube. Cells are visited slice by slice across the axis'
/// dominant coordinate; inside each slice only a box around the axis point
/// is tested.
fn stamp(raster: &mut OverlapRaster, tube: &Tube) -> Result<u64> {
    let (n, h, side, origin) = (raster.n, raster.h, raster.side, raster.origin);
    let a = tube.outer;
    let d = sub(tube.inner, tube.outer);
    let len = norm(d);
    let u = [d[0] / len, d[1] / len, d[2] / len];
    let w2 = 0.25 * tube.width * tube.width;
    let axis = (0..n).max_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs())).unwrap();
    let reach = 0.5 * tube.width / u[axis].abs() + h;
    let to_index = |x: f64| ((x - origin) / h - 0.5).round();
    let lo = to_index(a[axis].min(tube.inner[axis]) - reach).max(0.0) as usize;
    let hi = (to_index(a[axis].max(tube.inner[axis]) + reach) as usize).min(side - 1);
    let others: Vec<usize> = (0..n).filter(|&i| i != axis).collect();
    let mut covered = 0u64;
    for s in lo..=hi {
        let xs = origin + (s as f64 + 0.5) * h;
        let t_mid = ((xs - a[axis]) / u[axis]).clamp(0.0, len);
        let mid = axpy(a, t_mid, u);
        let ranges: Vec<(usize, usize)> = others
            .iter()
            .map(|&o| {
                let r = 0.5 * tube.width * 2.0 + h;
                let from = to_index(mid[o] - r).max(0.0) as usize;
                let to = (to_index(mid[o] + r).max(0.0) as usize).min(side - 1);
                (from, to)
            })
            .collect();
        let mut visit = |idx: [usize; 3]| -> Result<()> {
            let mut p = [0.0; 3];
            for k in 0..n {
                p[k] = origin + (idx[k] as f64 + 0.5) * h;
            }
            let rel = sub(p, a);
            let t = dot(rel, u);
            if t < 0.0 || t > len {
                return Ok(());
            }
            let perp = axpy(rel, -t, u);
            if dot(perp, perp) <= w2 {
                let flat = idx[0] + side * (idx[1] + side * idx[2]);
                let c = &mut raster.counts[flat];
                *c = c.checked_add(1).ok_or_else(|| LabError::Geometry("overlap count overflow".into()))?;
                covered += 1;
            }
            Ok(())
        };
        let mut idx = [0usize; 3];
        idx[axis] = s;
        for i in ranges[0].0..=ranges[0].1 {
            idx[others[0]] = i;
            if n == 2 {
                visit(idx)?;
            } else {
                for j in ranges[1].0..=ranges[1].1 {
                    idx[others[1]] = j;
                    visit(idx)?;
                }
            }
        }
    }
    Ok(covered)
}

/// `measures[d − 1]` is the measure of `{Σχ ≥ d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapHistogram {
    pub n: usize,
    pub measures: Vec<f64>,
}

impl OverlapHistogram {
    pub fn measure(&self, d: usize) -> f64 {
        if d == 0 {
            return f64::INFINITY;
        }
        self.measures.get(d - 1).copied().unwrap_or(0.0)
    }

    pub fn max_level(&self) -> usize {
        self.measures.len()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "d,measure")?;
        for (i, m) in self.measures.iter().enumerate() {
            writeln!(w, "{},{:.12e}", i + 1, m)?;
        }
        Ok(())
    }
}

pub fn overlap_histogram(tubes: &TubeSet, h: f64) -> Result<OverlapHistogram> {
    Ok(rasterize(tubes, h)?.histogram())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub levels: usize,
    pub d_range: (usize, usize),
}

/// Least-squares slope of `log measure` against `log d` over the levels
/// `d ∈ [d_lo, d_hi]` with positive measure.
pub fn fit_overlap_exponent(hist: &OverlapHistogram, d_lo: usize, d_hi: usize) -> Result<ExponentFit> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for d in d_lo.max(1)..=d_hi.min(hist.max_level()) {
        let m = hist.measure(d);
        if m > 0.0 {
            x.push((d as f64).ln());
            y.push(m.ln());
        }
    }
    if x.len() < 4 {
        return Err(LabError::Fit(format!("{} nonzero levels, need at least 4", x.len())));
    }
    let (slope, intercept) = linear_fit(&x, &y)?;
    Ok(ExponentFit { slope, intercept, levels: x.len(), d_range: (d_lo, d_hi) })
}

/// Fit over the tail of the histogram: levels from `d_max/8` to `d_max/2`,
/// above the plateau of small counts and below the few-cell top levels.
pub fn fit_overlap_tail(hist: &OverlapHistogram) -> Result<ExponentFit> {
    let top = hist.max_level();
    fit_overlap_exponent(hist, (top / 8).max(2), (top / 2).max(5))
}

/// `C(r) = max overlap on |x| = r / ((R+Δ)/r)^{n−1}` at each radius.
pub fn sphere_overlap_constants(raster: &OverlapRaster, spec: &ShellSpec, radii: &[f64]) -> Vec<(f64, u16, f64)> {
    radii
        .iter()
        .map(|&r| {
            let m = raster.sphere_max(r);
            (r, m, f64::from(m) / (spec.outer() / r).powi(spec.n as i32 - 1))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinShellReport {
    pub histogram: OverlapHistogram,
    /// `measure(d)·d²/(ΔR)` per level.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Levels whose measure is below this many tube footprints `ε²` are
/// excluded from the thin-shell maximum: they hold a handful of cells.
pub const THIN_MIN_FOOTPRINTS: f64 = 4.0;

/// The planar thin-shell estimate `|{Σχ ≥ d}| ≲ ΔR/d²`.
pub fn thin_shell_2d(spec: &ShellSpec, h: f64) -> Result<ThinShellReport> {
    if spec.n != 2 || spec.kind() != ShellKind::Thin {
        return param("thin_shell_2d needs a planar shell with delta < R/2");
    }
    let hist = overlap_histogram(&generate_brush(spec)?, h)?;
    let floor = THIN_MIN_FOOTPRINTS * spec.eps * spec.eps;
    let ratios: Vec<f64> = (1..=hist.max_level())
        .map(|d| hist.measure(d) * (d * d) as f64 / (spec.delta * spec.r))
        .collect();
    let max_ratio = ratios
        .iter()
        .enumerate()
        .filter(|(i, _)| hist.measure(i + 1) >= floor)
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    Ok(ThinShellReport { histogram: hist, ratios, max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(matches!(ShellSpec::new(2, 1.0, 1.0, 2.0, 1.0 / 64.0), Err(LabError::Geometry(_))));
        assert!(ShellSpec::new(2, 1.0, 1.0, 0.5, 0.2).is_err());
        assert_eq!(ShellSpec::new(2, 8.0, 1.0, 8.0, 1.0 / 64.0).unwrap().kind(), ShellKind::Thin);
    }

    #[test]
    fn planar_brush_count_and_invariants() {
        let spec = ShellSpec::new(2, 1.0, 1.0, 0.5, 1.0 / 64.0).unwrap();
        let set = generate_brush(&spec).unwrap();
        let expected = 4.0 * PI * 64.0;
        let count = set.tubes.len() as f64;
        assert!(count > expected / 2.0 && count < expected * 2.0);
        for t in &set.tubes {
            for r in t.residuals(&spec) {
                assert!(r < 1e-9, "{:?}", t.residuals(&spec));
            }
        }
    }

    #[test]
    fn spatial_brush_invariants() {
        let spec = ShellSpec::new(3, 1.0, 1.0, 0.5, 1.0 / 16.0).unwrap();
        let set = generate_brush(&spec).unwrap();
        assert!(!set.tubes.is_empty());
        for t in &set.tubes {
            for r in t.residuals(&spec) {
                assert!(r < 1e-9, "{:?}", t.residuals(&spec));
            }
            // North-heading: the inner end is no further south than the outer one
            // for tubes started in the northern hemisphere.
            if t.outer[2] > 1e-9 {
                assert!(t.inner[2] >= t.outer[2] - 1e-9 || t.inner[2] > -t.outer[2]);
            }
        }
    }

    #[test]
    fn thin_shell_axes_cross_the_shell() {
        let spec = ShellSpec::new(2, 8.0, 1.0, 8.0, 1.0 / 64.0).unwrap();
        for t in generate_brush(&spec).unwrap().tubes {
            assert!(t.length() >= 1.0);
        }
    }

    #[test]
    fn single_and_disjoint_tubes() {
        let spec = ShellSpec::new(2, 1.0, 1.0, 1.0, 1.0 / 32.0).unwrap();
        let all = generate_brush(&spec).unwrap();
        let one = TubeSet { spec, tubes: vec![all.tubes[5]] };
        let hist = overlap_histogram(&one, spec.eps / 8.0).unwrap();
        let vol = one.total_volume();
        assert!((hist.measure(1) - vol).abs() <= 0.1 * vol);
        assert_eq!(hist.measure(2), 0.0);
        let far = TubeSet { spec, tubes: vec![all.tubes[0], all.tubes[all.tubes.len() / 2]] };
        assert_eq!(overlap_histogram(&far, spec.eps / 4.0).unwrap().measure(2), 0.0);
    }

    #[test]
    fn cell_count_identity_and_monotone_histogram() {
        let spec = ShellSpec::new(2, 1.0, 1.0, 1.0, 1.0 / 32.0).unwrap();
        let raster = rasterize(&generate_brush(&spec).unwrap(), spec.eps / 4.0).unwrap();
        let hist = raster.histogram();
        let cell = raster.h * raster.h;
        let layered: f64 = hist.measures.iter().sum::<f64>() / cell;
        let stamped: u64 = raster.tube_cells.iter().sum();
        assert_eq!(layered.round() as u64, stamped);
        assert!(hist.measures.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn raster_guard() {
        let spec = ShellSpec::new(3, 1.0, 1.0, 1.0, 1.0 / 64.0).unwrap();
        let set = TubeSet { spec, tubes: vec![] };
        assert!(rasterize(&set, 1.0 / 1024.0).is_err());
        assert!(rasterize(&set, spec.eps).is_err());
    }

    #[test]
    fn fit_needs_levels() {
        let hist = OverlapHistogram { n: 2, measures: vec![1.0, 0.5, 0.0] };
        assert!(fit_overlap_exponent(&hist, 1, 3).is_err());
        let power = OverlapHistogram { n: 2, measures: (1..=20).map(|d| 3.0 / (d * d) as f64).collect() };
        let fit = fit_overlap_exponent(&power, 1, 20).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
    }
}
