//! Property tests for the structural invariants of each module.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use disclab::bessel::{bessel_j, bessel_j_integral, bessel_j_series, jv, BesselQuery};
use disclab::grid::{mixed_norm, weighted_lp_norm, GridScheme, ModeFunction, ModeIndex, NormParams, RadialGrid, RadialProfile};
use disclab::kernels::{kernel_k, kernel_split, lp_operator_norm, DiscreteOperator, KernelSpec, Region, SplitPiece};
use disclab::maximal::{hl_max_1d, universal_kakeya_radial, MaximalQuery};
use disclab::planar::{apply_multiplier, GridField2D, MultiplierSymbol};
use disclab::restriction::{block_values, CoefficientFamily};
use disclab::weights::{a1_construct, ap_characteristic, random_step_weight, WeightSamples};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn shared_grid() -> Arc<RadialGrid<f64>> {
    Arc::new(RadialGrid::make(GridScheme::Linear, 6.0, 241).unwrap())
}

/// `Σ c_j r^j e^{−r}` with complex coefficients.
fn profile(grid: &Arc<RadialGrid<f64>>, c: &[(f64, f64)]) -> RadialProfile<f64> {
    RadialProfile::from_fn(grid.clone(), |r| {
        c.iter().enumerate().map(|(j, &(a, b))| Complex64::new(a, b) * r.powi(j as i32)).sum::<Complex64>() * (-r).exp()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 3)
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn single_mode_norm_is_the_weighted_norm(c in coeffs(), p in 1.1..6.0f64, n in 2u32..5) {
        let grid = shared_grid();
        let g = profile(&grid, &c);
        let f = ModeFunction::single(ModeIndex::new(n, 1, 1).unwrap(), g.clone());
        let a = mixed_norm(&f, &NormParams::new(p, n).unwrap()).unwrap();
        let b = weighted_lp_norm(&g, p, f64::from(n - 1)).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn mixed_norm_triangle_inequality(c1 in coeffs(), c2 in coeffs(), c3 in coeffs(), c4 in coeffs(), p in 1.1..6.0f64) {
        let grid = shared_grid();
        let (i1, i2) = (ModeIndex::new(3, 1, 1).unwrap(), ModeIndex::new(3, 2, 4).unwrap());
        let build = |a: &RadialProfile<f64>, b: &RadialProfile<f64>| {
            let mut f = ModeFunction::new(3);
            f.insert(i1, a.clone()).unwrap();
            f.insert(i2, b.clone()).unwrap();
            f
        };
        let (f1, f2, g1, g2) = (profile(&grid, &c1), profile(&grid, &c2), profile(&grid, &c3), profile(&grid, &c4));
        let sum = |a: &RadialProfile<f64>, b: &RadialProfile<f64>| {
            RadialProfile::new(grid.clone(), a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect()).unwrap()
        };
        let params = NormParams::new(p, 3).unwrap();
        let lhs = mixed_norm(&build(&sum(&f1, &g1), &sum(&f2, &g2)), &params).unwrap();
        let rhs = mixed_norm(&build(&f1, &f2), &params).unwrap() + mixed_norm(&build(&g1, &g2), &params).unwrap();
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn bessel_three_term_recurrence(nu in 1.0..60.0f64, x in 1.0..120.0f64) {
        let (lo, mid, hi) = (jv(nu - 1.0, x), jv(nu, x), jv(nu + 1.0, x));
        let scale = lo.abs().max(mid.abs()).max(hi.abs());
        prop_assert!((lo + hi - 2.0 * nu / x * mid).abs() <= 1e-8 * scale);
    }

    #[test]
    fn series_and_integral_agree_within_bounds(nu in 0.0..40.0f64, x in 0.0..20.0f64) {
        let s = bessel_j_series(nu, x);
        let i = bessel_j_integral(nu, x);
        prop_assert!((s.value - i.value).abs() <= s.abs_error_bound + i.abs_error_bound + 1e-15);
    }

    #[test]
    fn half_integer_orders_match_elementary_forms(x in 0.1..50.0f64) {
        let a = (2.0 / (PI * x)).sqrt();
        let (s, c) = x.sin_cos();
        let forms = [(0.5, a * s), (1.5, a * (s / x - c)), (2.5, a * ((3.0 / (x * x) - 1.0) * s - 3.0 * c / x))];
        for (nu, v) in forms {
            prop_assert!((bessel_j(BesselQuery::new(nu, x).unwrap()).value - v).abs() <= 1e-10);
        }
    }

    #[test]
    fn kernel_symmetry_and_split(nu in 0.5..30.0f64, t in 0.1..60.0f64, r in 0.1..60.0f64) {
        let k = kernel_k(nu, t, r).unwrap();
        prop_assert!((k - kernel_k(nu, r, t).unwrap()).abs() <= 1e-12 * (1.0 + k.abs()));
        prop_assume!((t - r).abs() > 1e-3);
        let pieces: f64 = [SplitPiece::J1, SplitPiece::J2, SplitPiece::J3, SplitPiece::J4]
            .iter()
            .map(|&j| kernel_split(&KernelSpec::piece(nu, j, (Region::All, Region::All)), t, r).unwrap())
            .sum();
        prop_assert!((pieces - k).abs() <= 1e-10);
    }

    #[test]
    fn kernel_is_continuous_across_the_diagonal(nu in 0.5..20.0f64, t in 0.5..40.0f64) {
        let d = kernel_k(nu, t, t).unwrap();
        // 2e-3 lies on the closed-form side of the near-diagonal switch, the
        // others on the quadrature side. K may peak just off the diagonal, so
        // monotone shrinking is only asked for once the offset is tiny.
        let gaps: Vec<f64> = [2e-3, 1e-4, 1e-6, 1e-8].iter().map(|e| (kernel_k(nu, t, t * (1.0 + e)).unwrap() - d).abs()).collect();
        prop_assert!(gaps[1..].windows(2).all(|g| g[1] <= g[0]), "{gaps:?}");
        prop_assert!(gaps[0].is_finite());
        prop_assert!(gaps[3] <= 1e-6);
    }

    #[test]
    fn l2_norm_estimate_between_column_and_frobenius(data in prop::collection::vec(-3.0..3.0f64, 12)) {
        let a = DiscreteOperator::from_dense(3, 4, data.clone()).unwrap();
        let est = lp_operator_norm(&a, 2.0, 0.0).unwrap().value;
        let max_col = (0..4).map(|j| (0..3).map(|i| data[i * 4 + j].powi(2)).sum::<f64>().sqrt()).fold(0.0, f64::max);
        prop_assert!(est <= a.frobenius() * (1.0 + 1e-12));
        prop_assert!(est >= max_col * (1.0 - 1e-9));
    }

    #[test]
    fn hl_max_dominates_and_fixes_constants(v in prop::collection::vec(0.0..5.0f64, 2..40), c in 0.1..4.0f64) {
        for i in 0..v.len() {
            prop_assert!(hl_max_1d(&v, i) >= v[i]);
        }
        let flat = vec![c; v.len()];
        prop_assert!((hl_max_1d(&flat, v.len() / 2) - c).abs() <= 1e-12);
    }

    #[test]
    fn ap_characteristic_at_least_one_and_duality(seed in 0u64..1000, p in 1.2..4.0f64) {
        let f = random_step_weight(seed, 8, 1.0);
        let w = WeightSamples::from_fn(1.0, 64, &f).unwrap();
        let a = ap_characteristic(&w, p).unwrap().characteristic;
        prop_assert!(a >= 1.0);
        let pp = p / (p - 1.0);
        let dual = w.map(|v| v.powf(1.0 - pp));
        let b = ap_characteristic(&dual, pp).unwrap().characteristic;
        prop_assert!((a.powf(1.0 / p) - b.powf(1.0 / pp)).abs() <= 1e-9 * a.powf(1.0 / p));
    }

    #[test]
    fn a1_construct_monotone_and_homogeneous(seed in 0u64..1000, lift in 0.0..2.0f64, scale in 0.1..10.0f64, s in 1.1..3.0f64) {
        let f = random_step_weight(seed, 8, 1.0);
        let w = WeightSamples::from_fn(1.0, 64, &f).unwrap();
        let larger = w.map(|v| v + lift);
        let (a, b) = (a1_construct(&w, s).unwrap(), a1_construct(&larger, s).unwrap());
        prop_assert!(a.values.iter().zip(&b.values).all(|(x, y)| *x <= *y * (1.0 + 1e-12)));
        let scaled = a1_construct(&w.map(|v| scale * v), s).unwrap();
        prop_assert!(a.values.iter().zip(&scaled.values).all(|(x, y)| (scale * x - y).abs() <= 1e-12 * y));
    }
}

fn kakeya_grid() -> Arc<RadialGrid<f64>> {
    Arc::new(RadialGrid::uniform(0.0, 4.0, 257).unwrap())
}

fn bump_profile(heights: &[f64]) -> RadialProfile<f64> {
    let grid = kakeya_grid();
    let h = heights.to_vec();
    RadialProfile::from_real_fn(grid, move |r| {
        let i = ((r / 4.0) * (h.len() - 1) as f64).round() as usize;
        h[i.min(h.len() - 1)]
    })
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn kakeya_monotone_and_sublinear(
        a in prop::collection::vec(0.0..1.0f64, 8),
        b in prop::collection::vec(0.0..1.0f64, 8),
        rho in 0.0..2.0f64,
    ) {
        let res = (32, 64);
        let fa = bump_profile(&a);
        let fb = bump_profile(&b);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let u = |f: RadialProfile<f64>| universal_kakeya_radial(&MaximalQuery::new(f, rho, res).unwrap());
        let (ua, ub, us) = (u(fa), u(fb), u(bump_profile(&sum)));
        prop_assert!(us <= ua + ub + 1e-12);
        prop_assert!(ua <= us + 1e-12 && ub <= us + 1e-12);
    }
}

#[test]
fn planar_identity_round_trip_and_modulation_covariance() {
    let (n, l) = (64, 16.0);
    let f = GridField2D::from_fn(n, l, |x, y| {
        Complex64::new((-(x * x + y * y) / 2.0).exp(), 0.3 * (-(x - 1.0).powi(2) - y * y).exp())
    })
    .unwrap();
    // A disc enclosing the whole frequency box is the identity: the transform
    // pair preserves the field, hence its ℓ² norm.
    let all = apply_multiplier(&MultiplierSymbol::Disc { radius: 1e3 }, &f).unwrap();
    let err: f64 = all.values().iter().zip(f.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    assert!(err <= 1e-10 * f.l2());
    assert!((all.l2() - f.l2()).abs() <= 1e-10 * f.l2());

    // A ball centred at a grid frequency c is the disc conjugated by modulation.
    let dk = 2.0 * PI / l;
    let c = [3.0 * dk, -2.0 * dk];
    let shifted = apply_multiplier(&MultiplierSymbol::BallShifted { radius: 1.3, center: c }, &f).unwrap();
    let conj = apply_multiplier(&MultiplierSymbol::Disc { radius: 1.3 }, &f.modulate([-c[0], -c[1]])).unwrap().modulate(c);
    let gap: f64 = shifted.values().iter().zip(conj.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    assert!(gap <= 1e-10 * f.l2());
}

#[test]
fn block_slopes_stable_under_density_doubling() {
    let ms = [16.0, 32.0, 64.0];
    let slopes = |density: f64| -> Vec<f64> {
        let ln: Vec<[f64; 2]> = ms
            .iter()
            .map(|&m| {
                let v = block_values(2, 6.0, m, CoefficientFamily::BlockExtremal, density).unwrap();
                [v.ln_blocks[0], v.ln_blocks[1]]
            })
            .collect();
        (0..2)
            .map(|b| {
                let x: Vec<f64> = ms.iter().map(|m| m.ln()).collect();
                let y: Vec<f64> = ln.iter().map(|v| v[b]).collect();
                disclab::planar::linear_fit(&x, &y).unwrap().0
            })
            .collect()
    };
    for (a, b) in slopes(1.0).iter().zip(slopes(2.0)) {
        assert!((a - b).abs() < 0.05);
    }
}
