use lagmax::measure::{
    dist_fn, dist_fn_indicator, gaussian_tail_levelset, levelset_bound_check, log_grid, lorentz_p1_norm,
    lorentz_zygmund_norm, product_levelset_exact, rearrange, weak_orlicz_quasinorm, AxisBox, BoxUnion, CurveMethod,
    DistMethod, DistributionCurve, Rearrangement, Sampling,
};
use lagmax::quad::{integrate_axis, Axis, QuadConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const E: f64 = std::f64::consts::E;

fn unit_cube(d: usize) -> BoxUnion {
    BoxUnion::single(AxisBox::cube(d, 0.0, 1.0).unwrap())
}

fn inv_product(x: &[f64]) -> f64 {
    1.0 / x.iter().product::<f64>()
}

#[test]
fn indicator_level_set_by_sampling() {
    let f = |x: &[f64]| if x.iter().all(|&v| v < 1.0) { 1.0 } else { 0.0 };
    let c = dist_fn(f, &unit_cube(2), &[0.5], &DistMethod::monte_carlo(10_000, 1)).unwrap();
    assert!((c.samples()[0].measure - 1.0).abs() < 1e-12);
    assert_eq!(c.samples()[0].stderr, 0.0);
}

#[test]
fn inverse_product_level_set_monte_carlo() {
    let want = 2.0 / E;
    assert!((product_levelset_exact(2, 1.0, E) - want).abs() < 1e-15);
    let c = dist_fn(inv_product, &unit_cube(2), &[E], &DistMethod::monte_carlo(1_000_000, 7)).unwrap();
    let got = c.samples()[0].measure;
    assert!((got / want - 1.0).abs() < 0.01, "{got}");
    assert!(!c.budget_exhausted());
}

#[test]
fn inverse_product_level_set_by_quadrature() {
    // |{x1 x2 < 1/ν}| = 1/ν + ∫_{1/ν}^1 (1/(ν x1)) dx1
    let nu = E;
    let cfg = QuadConfig::with_rel_tol(1e-12);
    let tail = integrate_axis(|x1| 1.0 / (nu * x1), &Axis::new(1.0 / nu, 1.0), &cfg).unwrap().value;
    assert!((1.0 / nu + tail - product_levelset_exact(2, 1.0, nu)).abs() < 1e-12);
}

#[test]
fn closed_form_matches_monte_carlo_up_to_dimension_four() {
    for d in 1..=4 {
        for t in [0.5f64, 1.0, 3.0] {
            // levels where the set fills between ~5% and ~70% of the cube
            for frac in [0.7, 0.2, 0.05] {
                let mut nu = 1.0 / t.powi(d as i32);
                while product_levelset_exact(d, t, nu) > frac * t.powi(d as i32) {
                    nu *= 1.1;
                }
                let exact = product_levelset_exact(d, t, nu);
                let cube = BoxUnion::single(AxisBox::cube(d, 0.0, t).unwrap());
                let c = dist_fn(inv_product, &cube, &[nu], &DistMethod::monte_carlo(1_000_000, 11)).unwrap();
                let mc = c.samples()[0].measure;
                assert!((mc / exact - 1.0).abs() < 0.01, "d={d} t={t} ν={nu}: {mc} vs {exact}");
            }
        }
    }
}

#[test]
fn log_uniform_sampling_resolves_small_sets() {
    let d = 3;
    let nu = 1e6;
    let exact = product_levelset_exact(d, 1.0, nu);
    let domain = BoxUnion::single(AxisBox::cube(d, 1e-9, 1.0).unwrap());
    let m = DistMethod::MonteCarlo { budget: 1_000_000, seed: 3, sampling: Sampling::LogUniform };
    let c = dist_fn(inv_product, &domain, &[nu], &m).unwrap();
    let got = c.samples()[0].measure;
    assert!((got / exact - 1.0).abs() < 0.01, "{got} vs {exact}");
}

#[test]
fn monte_carlo_is_independent_of_thread_count() {
    let lambdas = [2.0, E, 10.0];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| dist_fn(inv_product, &unit_cube(2), &lambdas, &DistMethod::monte_carlo(100_000, 5)).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    let c = dist_fn(inv_product, &unit_cube(2), &lambdas, &DistMethod::monte_carlo(100_000, 6)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn grid_method_converges() {
    let c = dist_fn(inv_product, &unit_cube(2), &[E], &DistMethod::Grid { per_axis: 1024 }).unwrap();
    let got = c.samples()[0].measure;
    assert!((got / (2.0 / E) - 1.0).abs() < 1e-3);
    assert_eq!(c.method(), CurveMethod::Grid);
}

#[test]
fn rearrangement_examples() {
    let lambdas = log_grid(1e-3, 1e3, 8);
    // χ_E with |E| = 0.3 as two boxes
    let set = BoxUnion::new(vec![
        AxisBox::new(vec![0.0], vec![0.1]).unwrap(),
        AxisBox::new(vec![0.5], vec![0.7]).unwrap(),
    ])
    .unwrap();
    let r = rearrange(&dist_fn_indicator(&set, 1.0, &lambdas).unwrap()).unwrap();
    for s in [1e-6, 0.1, 0.29] {
        assert_eq!(r.eval(s), 1.0);
    }
    assert_eq!(r.eval(0.31), 0.0);

    let curve = DistributionCurve::from_closed_form(&lambdas, |l| l.powi(-2).min(1.0)).unwrap();
    let r = rearrange(&curve).unwrap();
    for s in log_grid(1e-6, 0.9, 3) {
        assert!((r.eval(s) / s.powf(-0.5) - 1.0).abs() < 1e-9, "s={s}");
    }
}

#[test]
fn rearrangement_of_decreasing_function_is_a_fixed_point() {
    // f(x) = e^{-x} on (0, 10): already nonincreasing, so f* = f there
    let f = |x: &[f64]| (-x[0]).exp();
    let domain = BoxUnion::single(AxisBox::new(vec![0.0], vec![10.0]).unwrap());
    let mut lambdas = log_grid(1e-4, 0.5, 16);
    lambdas.extend((500..1000).map(|k| k as f64 * 1e-3));
    let curve = dist_fn(f, &domain, &lambdas, &DistMethod::Grid { per_axis: 1 << 16 }).unwrap();
    let r = rearrange(&curve).unwrap();
    for s in [0.01, 0.5, 2.0, 7.0] {
        assert!((r.eval(s) / (-s).exp() - 1.0).abs() < 2e-3, "s={s}: {}", r.eval(s));
    }
}

#[test]
fn equimeasurability() {
    let lambdas = log_grid(1e-2, 1e4, 8);
    let curve = DistributionCurve::from_closed_form(&lambdas, |l| (l.powf(-1.5) * 2.0).min(3.0)).unwrap();
    let r = rearrange(&curve).unwrap();
    for p in curve.samples() {
        let m = r.distribution(p.lambda);
        assert!((m - p.measure).abs() <= 1e-9 * p.measure.max(1e-300), "λ={}: {m} vs {}", p.lambda, p.measure);
    }
}

#[test]
fn lorentz_norm_properties() {
    let p = 4.0 / 3.0;
    let mut lambdas = log_grid(1e-3, 1e3, 8);
    lambdas.push(2.0);
    let set = |len: f64| BoxUnion::single(AxisBox::new(vec![0.0], vec![len]).unwrap());
    let norm = |len: f64, h: f64| {
        lorentz_p1_norm(p, &rearrange(&dist_fn_indicator(&set(len), h, &lambdas).unwrap()).unwrap()).unwrap().value
    };
    assert!((norm(1.0, 1.0) - p).abs() < 1e-9);
    assert!((norm(1.0, 2.0) - 2.0 * norm(1.0, 1.0)).abs() < 1e-9);
    for tau in [0.01, 0.25, 4.0] {
        assert!((norm(tau, 1.0) / norm(1.0, 1.0) - tau.powf(1.0 / p)).abs() < 1e-9);
    }
    // a power profile: f* = s^{-1/5} on (0,1), ‖·‖ = 1/(1/p - 1/5)
    let curve = DistributionCurve::from_closed_form(&log_grid(1e-2, 1e6, 8), |l| l.powi(-5).min(1.0)).unwrap();
    let n = lorentz_p1_norm(p, &rearrange(&curve).unwrap()).unwrap();
    assert!((n.value * (1.0 / p - 0.2) - 1.0).abs() < 1e-6, "{n:?}");
    assert!(n.rel_change() < 1e-3);
}

#[test]
fn lorentz_zygmund_properties() {
    let p0 = 4.0 / 3.0;
    let lambdas = log_grid(1e-3, 1e3, 8);
    for len in [1e-2, 1e-4, 1e-6] {
        let set = BoxUnion::single(AxisBox::new(vec![0.0], vec![len]).unwrap());
        let r = rearrange(&dist_fn_indicator(&set, 1.0, &lambdas).unwrap()).unwrap();
        let plain = lorentz_p1_norm(p0, &r).unwrap().value;
        assert!((lorentz_zygmund_norm(p0, 0.0, &r).unwrap().value - plain).abs() < 1e-12);
        let mut prev = 0.0;
        for npow in [0.0, 0.25, 0.5, 1.0] {
            let v = lorentz_zygmund_norm(p0, npow, &r).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }
        let npow = 0.25;
        let v = lorentz_zygmund_norm(p0, npow, &r).unwrap().value;
        let ratio = v / (len.powf(1.0 / p0) * (2.0 + 1.0 / len).ln().powf(npow)) / p0;
        assert!(ratio > 0.5 && ratio < 2.0, "|E|={len}: {ratio}");
    }
}

#[test]
fn weak_orlicz_properties() {
    let p1 = 4.0;
    let lambdas = log_grid(1e-3, 1e3, 16);
    for len in [1e-3, 1.0, 50.0] {
        let set = BoxUnion::single(AxisBox::new(vec![0.0], vec![len]).unwrap());
        let curve = dist_fn_indicator(&set, 1.0, &lambdas).unwrap();
        let weak = weak_orlicz_quasinorm(p1, 0.0, &curve).unwrap();
        let direct = curve.samples().iter().map(|s| s.lambda * s.measure.powf(1.0 / p1)).fold(0.0, f64::max);
        assert!((weak / direct - 1.0).abs() < 1e-9);
        for npow in [0.0, 1.0, 2.0] {
            let q = weak_orlicz_quasinorm(p1, npow, &curve).unwrap();
            let r = q / len.powf(1.0 / p1);
            assert!(r > 0.5 && r < 2.0, "|E|={len} N={npow}: {r}");
        }
    }
    let curve = DistributionCurve::from_closed_form(&lambdas, |l| l.powi(-3).min(1.0)).unwrap();
    let doubled = DistributionCurve::from_closed_form(&lambdas, |l| (l / 2.0).powi(-3).min(1.0)).unwrap();
    for npow in [1.0, 2.0] {
        let a = weak_orlicz_quasinorm(2.5, npow, &curve).unwrap();
        let b = weak_orlicz_quasinorm(2.5, npow, &doubled).unwrap();
        assert!(b <= 2.2 * a, "N={npow}: {b} vs {a}");
    }
}

#[test]
fn weak_orlicz_reports_boundary_supremum() {
    // λ μ^{1/2} for μ = λ^{-1} increases without bound
    let lambdas = log_grid(1e-2, 1e2, 8);
    let curve = DistributionCurve::from_closed_form(&lambdas, |l| 1.0 / l).unwrap();
    assert!(weak_orlicz_quasinorm(2.0, 0.0, &curve).is_err());
}

#[test]
fn lorentz_and_weak_norms_compare_on_indicators() {
    let p = 4.0 / 3.0;
    let lambdas = log_grid(1e-3, 1e3, 8);
    for len in [1e-3, 0.3, 20.0] {
        let set = BoxUnion::single(AxisBox::new(vec![0.0], vec![len]).unwrap());
        let curve = dist_fn_indicator(&set, 1.0, &lambdas).unwrap();
        let strong = lorentz_p1_norm(p, &rearrange(&curve).unwrap()).unwrap().value;
        // weak norm at the true jump: |E|^{1/p}
        let weak = len.powf(1.0 / p);
        let ratio = strong / weak;
        assert!(ratio >= 1.0 && ratio <= p / (p - 1.0), "{ratio}");
    }
}

#[test]
fn level_set_lemma_sweep() {
    let mut upper = [0.0f64; 5];
    let mut lower = [f64::INFINITY; 5];
    for d in 1..=4 {
        for t in [1e-3f64, 1.0, 10.0] {
            for nu in log_grid(1e-3 / t.powi(d as i32), 1e9 / t.powi(d as i32), 4) {
                let r = levelset_bound_check(d, t, nu);
                upper[d] = upper[d].max(r.ratio);
                if r.lower_applies {
                    lower[d] = lower[d].min(r.ratio);
                }
            }
        }
        assert!(upper[d].is_finite() && lower[d] > 0.0, "d={d}");
    }
    // growth of the fitted C in d stays polynomial on this sweep
    assert!(upper[4] <= 4f64.powi(4) * upper[1]);
}

#[test]
fn gaussian_tail_against_one_dimensional_quadrature() {
    let cfg = QuadConfig::with_rel_tol(1e-10);
    for nu in [0.01, 1.0, 1e3] {
        // |{x : e^{-x}/x > ν}| as ∫ of the indicator, located by bisection
        let (mut lo, mut hi) = (1e-300f64, 1e3f64);
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if (-mid).exp() / mid > nu {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = integrate_axis(|x| if (-x).exp() / x > nu { 1.0 } else { 0.0 }, &Axis::new(0.0, hi), &cfg)
            .unwrap()
            .value;
        let g = gaussian_tail_levelset(1, 1.0, 1.0, nu, &cfg).unwrap();
        assert!((g.measure / oracle - 1.0).abs() < 0.01, "ν={nu}");
    }
}

#[test]
fn gaussian_tail_bound_and_monte_carlo() {
    let cfg = QuadConfig::with_rel_tol(1e-8);
    for gamma in [0.5, 1.0] {
        for d in [2, 3] {
            let mut c_max: f64 = 0.0;
            for nu in log_grid(1e-2, 1e8, 2) {
                let g = gaussian_tail_levelset(d, gamma, 1.0, nu, &cfg).unwrap();
                assert!(g.measure <= g.band_sum * (1.0 + 1e-6), "d={d} ν={nu}");
                c_max = c_max.max(g.measure / g.bound);
            }
            assert!(c_max.is_finite() && c_max < 1e3, "γ={gamma} d={d}: C = {c_max}");
        }
    }
    // Monte Carlo cross-check at d = 2 in log coordinates
    let (gamma, nu) = (1.0, 10.0);
    let g = gaussian_tail_levelset(2, gamma, 1.0, nu, &cfg).unwrap();
    let f = |x: &[f64]| (-(x[0] + x[1]).powf(gamma)).exp() / (x[0] * x[1]);
    let domain = BoxUnion::single(AxisBox::cube(2, 1e-12, 60.0).unwrap());
    let m = DistMethod::MonteCarlo { budget: 1_000_000, seed: 9, sampling: Sampling::LogUniform };
    let c = dist_fn(f, &domain, &[nu], &m).unwrap();
    let s = c.samples()[0];
    assert!((s.measure - g.measure).abs() < 4.0 * s.stderr + 0.01 * g.measure, "{s:?} vs {}", g.measure);
}

#[test]
fn gaussian_tail_sigma_scaling() {
    let cfg = QuadConfig::with_rel_tol(1e-10);
    let d = 2;
    for sigma in [0.1, 3.0] {
        for nu in [0.5, 50.0] {
            let scaled = gaussian_tail_levelset(d, 0.5, sigma, nu, &cfg).unwrap().measure;
            let base = gaussian_tail_levelset(d, 0.5, 1.0, nu * sigma.powi(-(d as i32)), &cfg).unwrap().measure;
            assert!((scaled / (sigma.powi(-(d as i32)) * base) - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn hardy_littlewood_rearrangement_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cells = 10;
    let lambdas_for = |vals: &[f64]| {
        let mut l: Vec<f64> = vals.iter().flat_map(|&v| [v, v * (1.0 - 1e-9)]).filter(|&v| v > 0.0).collect();
        l.sort_by(f64::total_cmp);
        l.dedup();
        l
    };
    let curve_for = |vals: &[f64]| {
        let lambdas = lambdas_for(vals);
        DistributionCurve::from_closed_form(&lambdas, |lam| {
            vals.iter().filter(|&&v| v > lam).count() as f64 / cells as f64
        })
        .unwrap()
    };
    for _ in 0..50 {
        let f: Vec<f64> = (0..cells).map(|_| rng.random_range(0.01..5.0)).collect();
        let g: Vec<f64> = (0..cells).map(|_| rng.random_range(0.01..5.0)).collect();
        let lhs: f64 = f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / cells as f64;
        let rf = rearrange(&curve_for(&f)).unwrap();
        let rg = rearrange(&curve_for(&g)).unwrap();
        let rhs: f64 = (0..cells)
            .map(|i| {
                let s = (i as f64 + 0.5) / cells as f64;
                rf.eval(s) * rg.eval(s)
            })
            .sum::<f64>()
            / cells as f64;
        assert!(lhs <= rhs * (1.0 + 1e-9), "{lhs} > {rhs}");
    }
}

proptest! {
    #[test]
    fn product_levelset_is_monotone(d in 1usize..5, t in 1e-2f64..10.0, nu in 1e-3f64..1e6, k in 1.0f64..10.0) {
        let a = product_levelset_exact(d, t, nu);
        let b = product_levelset_exact(d, t, nu * k);
        prop_assert!(b <= a * (1.0 + 1e-12));
        prop_assert!(a <= t.powi(d as i32) * (1.0 + 1e-12));
        prop_assert!(product_levelset_exact(d, t * k, nu) >= a * (1.0 - 1e-12));
    }

    #[test]
    fn rearrangements_are_nonincreasing(q in 0.1f64..3.0, cap in 0.1f64..10.0) {
        let lambdas = log_grid(1e-3, 1e3, 8);
        let curve = DistributionCurve::from_closed_form(&lambdas, |l| l.powf(-q).min(cap)).unwrap();
        let r = rearrange(&curve).unwrap();
        let s = log_grid(1e-9, 1e3, 7);
        for w in s.windows(2) {
            prop_assert!(r.eval(w[1]) <= r.eval(w[0]) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lorentz_norm_is_homogeneous(c in 0.1f64..10.0, len in 1e-3f64..1e2, p in 1.1f64..4.0) {
        let s = lagmax::measure::default_s_grid();
        let base = Rearrangement::from_fn(s.clone(), |x| if x < len { 1.0 } else { 0.0 }).unwrap();
        let scaled = Rearrangement::from_fn(s, |x| if x < len { c } else { 0.0 }).unwrap();
        let a = lorentz_p1_norm(p, &base).unwrap().value;
        let b = lorentz_p1_norm(p, &scaled).unwrap().value;
        prop_assert!((b / (c * a) - 1.0).abs() < 1e-9);
    }
}
