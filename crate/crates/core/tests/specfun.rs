use std::f64::consts::PI;

use lagmax::quad::{integrate_axis, Axis, QuadConfig};
use lagmax::specfun::{bessel_i, gamma, laguerre_fn, laguerre_poly, log_bessel_i, LaguerreIndex};
use proptest::prelude::*;

fn logspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
}

#[test]
fn reference_values() {
    // six published digits, truncated
    assert!((bessel_i(-0.5, 1.0).unwrap() - 1.231200).abs() < 1e-6);
    assert!((bessel_i(0.5, 1.0).unwrap() - 0.937674).abs() < 1e-6);
    assert!((log_bessel_i(-0.5, 1.0).unwrap() - 1.231200f64.ln()).abs() < 5e-7);
    assert_eq!(laguerre_poly(LaguerreIndex::new(0, -0.5).unwrap(), 7.3), 1.0);
    assert!((laguerre_poly(LaguerreIndex::new(1, -0.5).unwrap(), 1.0) + 0.5).abs() < 1e-15);
    assert!((laguerre_poly(LaguerreIndex::new(2, 0.0).unwrap(), 2.0) + 1.0).abs() < 1e-15);
    let want = (-0.5f64).exp() * PI.powf(-0.25);
    assert!((laguerre_fn(LaguerreIndex::new(0, -0.5).unwrap(), 1.0) / want - 1.0).abs() < 1e-13);
}

#[test]
fn three_halves_closed_form() {
    for x in logspace(1e-3, 30.0, 60) {
        let want = (2.0 / (PI * x)).sqrt() * (x.cosh() - x.sinh() / x);
        // the closed form cancels for small x, so use its series there
        let want = if x < 1e-2 { (2.0 / (PI * x)).sqrt() * x * x / 3.0 * (1.0 + x * x / 10.0) } else { want };
        assert!((bessel_i(1.5, x).unwrap() / want - 1.0).abs() < 1e-9, "x={x}");
    }
}

#[test]
fn small_argument_asymptotics() {
    for a in [-0.9, -0.5, -0.1, 0.0, 0.5, 2.0] {
        let lead = 1.0 / (2f64.powf(a) * gamma(a + 1.0));
        for x in logspace(1e-6, 1e-2, 20) {
            let r = bessel_i(a, x).unwrap() / x.powf(a) / lead;
            assert!((r - 1.0).abs() < 0.1, "a={a} x={x} ratio={r}");
        }
    }
}

#[test]
fn large_argument_asymptotics() {
    for a in [-0.9, -0.5, -0.1, 0.0, 0.5, 2.0] {
        for x in [50.0, 100.0, 500.0] {
            let lead = x - 0.5 * (2.0 * PI * x).ln();
            let r = (log_bessel_i(a, x).unwrap() - lead).exp();
            assert!((r - 1.0).abs() < 0.05, "a={a} x={x} ratio={r}");
        }
    }
}

#[test]
fn gram_matrix_is_identity() {
    let cfg = QuadConfig { abs_tol: 1e-12, ..QuadConfig::with_rel_tol(1e-9) };
    for a in [-0.9, -0.5, 0.0, 1.5] {
        for j in 0..=8 {
            for k in j..=8 {
                let (ij, ik) = (LaguerreIndex::new(j, a).unwrap(), LaguerreIndex::new(k, a).unwrap());
                let axis = Axis::new(0.0, f64::INFINITY).lo_exponent(a).tail_scale(4.0);
                let v = integrate_axis(|x| laguerre_fn(ij, x) * laguerre_fn(ik, x), &axis, &cfg).unwrap().value;
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-6, "a={a} j={j} k={k} inner={v}");
            }
        }
    }
}

proptest! {
    #[test]
    fn bessel_is_positive_and_increasing(a in 0.0f64..3.0, x in 1e-3f64..200.0) {
        let v = log_bessel_i(a, x).unwrap();
        let w = log_bessel_i(a, x * 1.01).unwrap();
        prop_assert!(v.is_finite() && w > v);
    }

    #[test]
    fn bessel_order_recurrence(a in -0.9f64..3.0, x in 0.05f64..40.0) {
        // I_{a-1} - I_{a+1} = (2a/x) I_a, with a - 1 > -1 after shifting a up
        let a = a + 1.0;
        let lhs = bessel_i(a - 1.0, x).unwrap() - bessel_i(a + 1.0, x).unwrap();
        let rhs = 2.0 * a / x * bessel_i(a, x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * bessel_i(a - 1.0, x).unwrap());
    }

    #[test]
    fn laguerre_three_term_recurrence(k in 1usize..30, a in -0.95f64..4.0, x in 0.0f64..40.0) {
        let p = |n: usize| laguerre_poly(LaguerreIndex::new(n, a).unwrap(), x);
        let n = k as f64;
        let lhs = (n + 1.0) * p(k + 1);
        let rhs = (2.0 * n + 1.0 + a - x) * p(k) - (n + a) * p(k - 1);
        let scale = ((2.0 * n + 1.0 + a + x) * p(k).abs() + (n + a).abs() * p(k - 1).abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
    }
}
