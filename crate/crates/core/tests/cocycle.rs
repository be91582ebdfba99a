mod common;

use common::{max_abs, naive_transfer, GOLDEN};
use num_complex::Complex64 as C64;
use powerlog::cocycle::{
    deviation_set, growth_first_hit, log_abs_det, lyapunov, lyapunov_reference, transfer, LogScaledMatrix, Mat2,
};
use powerlog::potential::Potential;
use powerlog::torus::{Dynamics, Frequency, TorusPoint};
use proptest::prelude::*;

fn golden() -> Dynamics {
    Dynamics::shift(Frequency::golden())
}

fn pt(x: f64) -> TorusPoint {
    TorusPoint::new(vec![x])
}

/// `||reconstruct - naive|| / ||naive||` in the max-entry norm.
fn rel_err(m: &LogScaledMatrix, lambda: f64, x: f64, z: C64, n: usize) -> f64 {
    let naive = naive_transfer(lambda, GOLDEN, x, z, n);
    let r = m.reconstruct();
    let mut diff: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            diff = diff.max((r.0[i][j] - naive[(i, j)]).norm());
        }
    }
    diff / max_abs(&naive)
}

fn adjugate(m: &Mat2) -> Mat2 {
    let [[a, b], [c, d]] = m.0;
    Mat2([[d, -b], [-c, a]])
}

#[test]
fn matches_naive_product_up_to_300_steps() {
    let f = Potential::cosine(4.0);
    let d = golden();
    for &x in &[0.0, 0.123, -0.37] {
        for &z in &[C64::new(0.0, 0.0), C64::new(1.3, 0.0), C64::new(2.9, 0.1)] {
            for &n in &[1usize, 7, 50, 150, 300] {
                let m = transfer(&f, &d, &pt(x), z, n as i64).unwrap();
                let e = rel_err(&m, 4.0, x, z, n);
                assert!(e < 1e-10, "x={x} z={z} n={n}: relative error {e:e}");
            }
        }
    }
}

#[test]
fn determinant_is_one_for_long_products() {
    let f = Potential::cosine(4.0);
    let d = golden();
    for &x in &[0.0, 0.3, -0.41] {
        for &n in &[1usize, 10, 100, 1000, 10_000] {
            let ld = log_abs_det(&f, &d, &pt(x), C64::new(0.7, 0.0), n).unwrap();
            assert!(ld.exp_m1().abs() < 1e-9, "x={x} n={n}: ln|det| = {ld:e}");
            let m = transfer(&f, &d, &pt(x), C64::new(0.7, 0.0), n as i64).unwrap();
            assert!((m.det_phase - 1.0).norm() < 1e-12);
            assert!(m.log_mag >= 0.0);
        }
    }
    // short products are small enough for the direct determinant
    for n in 1..=8 {
        let m = transfer(&f, &d, &pt(0.2), C64::new(0.3, 0.0), n).unwrap();
        assert!((m.det() - 1.0).norm() < 1e-9, "n={n}");
    }
}

#[test]
fn inverse_product_telescopes() {
    let d = golden();
    for &lambda in &[0.5, 4.0] {
        let f = Potential::cosine(lambda);
        for &n in &[1i64, 10, 100, 1000] {
            let x = pt(0.17);
            let z = C64::new(0.4, 0.0);
            let fwd = transfer(&f, &d, &x, z, n).unwrap();
            let inv = transfer(&f, &d, &d.iterate(&x, n).unwrap(), z, -n).unwrap();
            // A^{-1} = adj(A) for det 1, and adj preserves the spectral norm
            assert!((fwd.log_mag - inv.log_mag).abs() < 1e-8, "lambda={lambda} n={n}");
            let diff = inv.unit.max_abs_diff(&adjugate(&fwd.unit));
            assert!(diff < 1e-8, "lambda={lambda} n={n}: {diff:e}");
            if fwd.log_mag < 5.0 {
                let id = inv.compose(&fwd).reconstruct();
                assert!(id.max_abs_diff(&Mat2::IDENTITY) < 1e-8);
            }
        }
    }
}

#[test]
fn lyapunov_seed_invariance() {
    let f = Potential::cosine(4.0);
    let d = golden();
    let z = C64::new(0.0, 0.0);
    let a = lyapunov(&f, &d, z, 100, 1000, 1).unwrap();
    let b = lyapunov(&f, &d, z, 100, 1000, 2).unwrap();
    let combined = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() <= 4.0 * combined, "{} vs {} (stderr {combined:e})", a.mean, b.mean);
    assert_eq!(a, lyapunov(&f, &d, z, 100, 1000, 1).unwrap());
}

#[test]
fn deviation_complement_shrinks_with_k() {
    let f = Potential::cosine(4.0);
    let d = golden();
    let z = C64::new(0.0, 0.0);
    let l_ref = lyapunov_reference(&f, &d, z, 500, 3).unwrap();
    let mut last = f64::INFINITY;
    for k in [50, 100, 200, 400] {
        let s = deviation_set(&f, &d, z, k, 0.9, l_ref, 2000, 5).unwrap();
        let complement = 1.0 - s.measure();
        assert!(complement <= last, "k={k}: {complement} > {last}");
        last = complement;
    }
}

#[test]
fn first_hit_is_the_smallest_crossing() {
    let f = Potential::cosine(4.0);
    let d = golden();
    let z = C64::new(0.0, 0.0);
    let (k, d_frac, l_ref) = (20, 0.8, 4f64.ln());
    for &x0 in &[0.0, 0.31, -0.2] {
        let x = pt(x0);
        let j = growth_first_hit(&f, &d, &x, z, k, d_frac, l_ref, 500).unwrap().expect("a hit");
        let rate = |j: usize| 2.0 * transfer(&f, &d, &d.iterate(&x, j as i64).unwrap(), z, k as i64).unwrap().log_mag / k as f64;
        assert!(rate(j) >= d_frac * l_ref);
        for i in 1..j {
            assert!(rate(i) < d_frac * l_ref, "earlier crossing at {i} < {j}");
        }
    }
    assert_eq!(growth_first_hit(&f, &d, &pt(0.1), z, k, 0.0, l_ref, 10).unwrap(), Some(1));
    assert!(growth_first_hit(&f, &d, &pt(0.1), z, k, 0.8, l_ref, 0).is_err());
}

#[test]
fn skew_shift_cocycle_identity() {
    let f = Potential::gevrey_saturated(2, 2.0, 3, 3.0).unwrap();
    let d = Dynamics::skew_shift(Frequency::golden(), 2).unwrap();
    let x = TorusPoint::new(vec![0.1, -0.3]);
    let z = C64::new(0.5, 0.0);
    for (k, j) in [(5i64, 7i64), (30, 20), (50, 50)] {
        let whole = transfer(&f, &d, &x, z, k + j).unwrap();
        let a_j = transfer(&f, &d, &x, z, j).unwrap();
        let a_k = transfer(&f, &d, &d.iterate(&x, j).unwrap(), z, k).unwrap();
        let split = a_k.compose(&a_j);
        assert!((whole.log_mag - split.log_mag).abs() < 1e-10 * whole.log_mag.max(1.0));
        assert!(whole.unit.max_abs_diff(&split.unit) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_products_match_naive(
        lambda in 0.0..6.0f64, x in -0.5..0.5f64, e in -5.0..5.0f64, eta in 0.0..1.0f64, n in 1usize..=120,
    ) {
        let f = Potential::cosine(lambda);
        let z = C64::new(e, eta);
        let m = transfer(&f, &golden(), &pt(x), z, n as i64).unwrap();
        let err = rel_err(&m, lambda, x, z, n);
        prop_assert!(err < 1e-10, "relative error {:e}", err);
    }

    #[test]
    fn cocycle_identity(lambda in 0.0..6.0f64, x in -0.5..0.5f64, e in -4.0..4.0f64, k in 1i64..=50, j in 1i64..=50) {
        let f = Potential::cosine(lambda);
        let d = golden();
        let z = C64::new(e, 0.0);
        let whole = transfer(&f, &d, &pt(x), z, k + j).unwrap();
        let a_j = transfer(&f, &d, &pt(x), z, j).unwrap();
        let a_k = transfer(&f, &d, &d.iterate(&pt(x), j).unwrap(), z, k).unwrap();
        let split = a_k.compose(&a_j);
        prop_assert!((whole.log_mag - split.log_mag).abs() < 1e-10 * whole.log_mag.max(1.0));
        prop_assert!(whole.unit.max_abs_diff(&split.unit) < 1e-10);
    }

    #[test]
    fn norms_are_at_least_one(lambda in 0.0..8.0f64, x in -0.5..0.5f64, e in -6.0..6.0f64, n in -200i64..=200) {
        let m = transfer(&Potential::cosine(lambda), &golden(), &pt(x), C64::new(e, 0.0), n).unwrap();
        prop_assert!(m.log_mag >= -1e-12);
        prop_assert!(m.log_mag <= n.unsigned_abs() as f64 * (2.0 + e.abs() + lambda).ln() + 1e-9);
    }
}
