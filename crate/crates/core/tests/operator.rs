use lagmax::kernel::{KernelParams1D, TypeMultiIndex};
use lagmax::operator::{
    apply_kernel, apply_semigroup, hl_maximal_1d, maximal, semigroup_maximal, Piece, SeparableFunction, TimeGrid,
};
use lagmax::quad::{integrate_axis, Axis, QuadConfig};
use lagmax::specfun::{laguerre_fn, LaguerreIndex};

fn cfg() -> QuadConfig {
    QuadConfig::with_rel_tol(1e-9)
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

fn family() -> Vec<SeparableFunction> {
    vec![
        "box(0.5,1)".parse().unwrap(),
        "box(0,2)".parse().unwrap(),
        SeparableFunction::laguerre(0, -0.5).unwrap(),
        "powexp(-0.2,0,0,1)".parse().unwrap(),
    ]
}

#[test]
fn eigenfunctions_decay_at_their_eigenvalue() {
    for a in [-0.5, 0.0, 1.0] {
        let alpha = TypeMultiIndex::new(vec![a]).unwrap();
        for k in 0..=4 {
            let f = SeparableFunction::laguerre(k, a).unwrap();
            let idx = LaguerreIndex::new(k, a).unwrap();
            for t in [0.1, 0.5, 2.0] {
                for x in [0.2, 1.3, 5.0] {
                    let got = apply_semigroup(&alpha, t, &f, &[x], &cfg()).unwrap();
                    let want = (-0.5 * t * (2.0 * k as f64 + a + 1.0)).exp() * laguerre_fn(idx, x);
                    assert!((got - want).abs() < 1e-4, "a={a} k={k} t={t} x={x}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn short_time_recovers_smooth_bump() {
    let alpha = TypeMultiIndex::new(vec![-0.5]).unwrap();
    let f: SeparableFunction = "powexp(4,4)".parse().unwrap();
    let t = 1e-3;
    for x in [0.5, 1.0, 2.0] {
        let got = apply_semigroup(&alpha, t, &f, &[x], &cfg()).unwrap();
        assert!((got / f.eval(&[x]) - 1.0).abs() < 0.01, "x={x}");
        // composite Simpson over a window far wider than the kernel width
        let kp = KernelParams1D::new(-0.5, t / 2.0).unwrap();
        let (lo, hi, n) = (x - 0.4, x + 0.4, 40_000);
        let h = (hi - lo) / n as f64;
        let g = |y: f64| kp.h(x, y) * f.eval(&[y]);
        let mut s = g(lo) + g(hi);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(lo + i as f64 * h);
        }
        let brute = (-0.5 * t * 0.5).exp() * s * h / 3.0;
        assert!((got / brute - 1.0).abs() < 1e-6, "x={x}: {got} vs {brute}");
    }
}

#[test]
fn eigen_series_matches_integral_form() {
    let a = 0.0;
    let t = 0.5;
    let alpha = TypeMultiIndex::new(vec![a]).unwrap();
    let f: SeparableFunction = "box(0.5,1)".parse().unwrap();
    let coeffs: Vec<f64> = (0..40)
        .map(|k| {
            let idx = LaguerreIndex::new(k, a).unwrap();
            integrate_axis(|y| laguerre_fn(idx, y), &Axis::new(0.5, 1.0), &cfg()).unwrap().value
        })
        .collect();
    for x in [0.1, 0.75, 1.5, 4.0] {
        let series: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let idx = LaguerreIndex::new(k, a).unwrap();
                (-0.5 * t * (2.0 * k as f64 + a + 1.0)).exp() * c * laguerre_fn(idx, x)
            })
            .sum();
        let integral = apply_semigroup(&alpha, t, &f, &[x], &cfg()).unwrap();
        assert!((series - integral).abs() < 1e-3 * integral.abs().max(1e-3), "x={x}: {series} vs {integral}");
    }
}

#[test]
fn semigroup_law_on_test_family() {
    let a = -0.5;
    let alpha = TypeMultiIndex::new(vec![a]).unwrap();
    let inner_cfg = QuadConfig::with_rel_tol(1e-8);
    for f in family() {
        for (s, t) in [(0.2, 0.2), (0.2, 0.5), (0.5, 0.5)] {
            for x in [0.3, 1.0, 2.5] {
                let direct = apply_semigroup(&alpha, s + t, &f, &[x], &cfg()).unwrap();
                let kp = KernelParams1D::new(a, t / 2.0).unwrap();
                let axis = Axis::new(0.0, f64::INFINITY)
                    .lo_exponent(a)
                    .hints(kp.eta_hints(x))
                    .tail_scale(kp.tail_scale());
                let outer = integrate_axis(
                    |eta| {
                        if eta <= 0.0 {
                            return 0.0;
                        }
                        kp.h(x, eta) * apply_semigroup(&alpha, s, &f, &[eta], &inner_cfg).unwrap()
                    },
                    &axis,
                    &QuadConfig::with_rel_tol(1e-6),
                )
                .unwrap()
                .value;
                let composed = (-0.5 * t * (a + 1.0)).exp() * outer;
                assert!((composed / direct - 1.0).abs() < 1e-3, "f={f} s={s} t={t} x={x}: {composed} vs {direct}");
            }
        }
    }
}

#[test]
fn tensorization_in_dimensions_two_to_four() {
    let comps = [-0.5, 0.0, 0.7, -0.9];
    let pieces = ["box(0.5,1)", "powexp(0.5,1)", "laguerre(0,0.7)", "powexp(-0.3,0,0,2)"];
    let xs = [0.4, 1.7, 0.9, 0.05];
    for d in 2..=4 {
        let alpha = TypeMultiIndex::new(comps[..d].to_vec()).unwrap();
        let spec = pieces[..d].join("*");
        let f: SeparableFunction = spec.parse().unwrap();
        for t in [0.05, 0.8] {
            let joint = apply_kernel(&alpha, t, &f, &xs[..d], &cfg()).unwrap();
            let prod: f64 = (0..d)
                .map(|j| {
                    let aj = TypeMultiIndex::new(vec![comps[j]]).unwrap();
                    let fj: SeparableFunction = pieces[j].parse().unwrap();
                    apply_kernel(&aj, t, &fj, &[xs[j]], &cfg()).unwrap()
                })
                .product();
            assert!((joint / prod - 1.0).abs() < 1e-10, "d={d} t={t}");
        }
    }
}

#[test]
fn kernel_of_constant_is_bounded_for_type_zero() {
    let alpha = TypeMultiIndex::new(vec![0.0]).unwrap();
    // χ_(0,R) with R far outside the sampled window stands in for χ_(0,∞)
    let f: SeparableFunction = "box(0,1e4)".parse().unwrap();
    let mut top: f64 = 0.0;
    for t in logspace(1e-3, 1e2, 11) {
        for x in logspace(1e-3, 1e2, 11) {
            top = top.max(apply_kernel(&alpha, t, &f, &[x], &cfg()).unwrap());
        }
    }
    assert!(top < 2.0, "sup = {top}");
}

#[test]
fn maximal_dominates_grid_values_and_semigroup_sup() {
    let alpha = TypeMultiIndex::new(vec![-0.5]).unwrap();
    let f: SeparableFunction = "box(0.5,1)".parse().unwrap();
    let grid = TimeGrid::default();
    for x in [0.01, 0.7, 3.0] {
        let m = maximal(&alpha, &f, &[x], &grid, &cfg()).unwrap();
        for &t in grid.points().iter().step_by(7) {
            assert!(m.value >= apply_kernel(&alpha, t, &f, &[x], &cfg()).unwrap());
        }
        let s = semigroup_maximal(&alpha, &f, &[x], &grid, &cfg()).unwrap();
        assert!(m.value >= s.value);
    }
}

#[test]
fn maximal_lower_bound_near_origin() {
    let alpha = TypeMultiIndex::new(vec![-0.5]).unwrap();
    let f: SeparableFunction = "box(0.5,1)".parse().unwrap();
    let xs = [1e-4, 1e-3, 1e-2, 1e-1];
    let scaled = |ppd: usize| -> Vec<f64> {
        let grid = TimeGrid { points_per_decade: ppd, ..TimeGrid::default() };
        xs.iter().map(|&x| maximal(&alpha, &f, &[x], &grid, &cfg()).unwrap().value * x.powf(0.25)).collect()
    };
    let c32 = scaled(32);
    let c64 = scaled(64);
    let min32 = c32.iter().cloned().fold(f64::INFINITY, f64::min);
    let min64 = c64.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min32 > 0.05, "{c32:?}");
    assert!((min64 / min32 - 1.0).abs() < 0.005);
}

#[test]
fn maximal_self_convergence_and_argmax_stability() {
    let alpha = TypeMultiIndex::new(vec![-0.5]).unwrap();
    let f: SeparableFunction = "box(0.5,1)".parse().unwrap();
    let g32 = TimeGrid::default();
    let g64 = TimeGrid { points_per_decade: 64, ..g32.clone() };
    let half_tol = TimeGrid { refine_tol: g32.refine_tol / 2.0, ..g32.clone() };
    for x in logspace(1e-3, 1e1, 20) {
        let m32 = maximal(&alpha, &f, &[x], &g32, &cfg()).unwrap();
        let m64 = maximal(&alpha, &f, &[x], &g64, &cfg()).unwrap();
        assert!((m64.value / m32.value - 1.0).abs() < 0.005, "x={x}");
        let mh = maximal(&alpha, &f, &[x], &half_tol, &cfg()).unwrap();
        assert!((mh.argmax_t.ln() - m32.argmax_t.ln()).abs() <= g32.log_step() * (1.0 + 1e-9), "x={x}");
        assert!(mh.value >= m32.value * (1.0 - 1e-12));
    }
}

#[test]
fn hl_maximal_of_power_profile() {
    // x^{-1/5} on (0,1) at x = 2: the average over (0, 2 + r) is maximized at
    // r = 2, where it equals (5/4)/4.
    let f = Piece::power_exp(-0.2, 0.0, 0.0, 1.0).unwrap();
    let got = hl_maximal_1d(&f, 2.0).unwrap();
    assert!((got - 1.25 / 4.0).abs() < 1e-6, "{got}");
}
