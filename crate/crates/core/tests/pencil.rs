use lagmax::kernel::TypeMultiIndex;
use lagmax::pencil::{classify, exponents, Exponents, PencilPoint, Regime};
use proptest::prelude::*;

fn points(p0: f64, p1: f64) -> Vec<PencilPoint> {
    let mut v = vec![PencilPoint::P0Endpoint, PencilPoint::P1Endpoint];
    for s in [0.05, 0.2, 0.4, 0.6, 0.8, 0.95] {
        v.push(PencilPoint::Lp { p: p0 + s * (p1 - p0) });
    }
    v.extend([PencilPoint::Lp { p: 1.01 }, PencilPoint::Lp { p: p1 * 1.5 }, PencilPoint::Lp { p: p0 * 0.9 }]);
    v
}

proptest! {
    #[test]
    fn conjugacy(a in -0.999f64..-0.001) {
        let alpha = TypeMultiIndex::new(vec![a]).unwrap();
        let Exponents::Pencil(e) = exponents(&alpha, 0.0) else { panic!() };
        prop_assert!((1.0 / e.p0 + 1.0 / e.p1 - 1.0).abs() < 1e-14);
        prop_assert!(e.p0 > 1.0 && e.p0 < 2.0 && e.p1 > 2.0);
    }

    #[test]
    fn permutation_invariance(v in proptest::collection::vec(-0.9f64..1.0, 1..6), seed in 0usize..720) {
        let alpha = TypeMultiIndex::new(v.clone()).unwrap();
        let mut w = v.clone();
        // a deterministic permutation from the seed
        let n = w.len();
        for i in 0..n {
            w.swap(i, (seed / (i + 1)) % n);
        }
        let beta = TypeMultiIndex::new(w).unwrap();
        let (p0, p1) = match exponents(&alpha, 0.0) {
            Exponents::Pencil(e) => (e.p0, e.p1),
            Exponents::Standard { .. } => (1.5, 3.0),
        };
        for pt in points(p0, p1) {
            prop_assert_eq!(classify(&alpha, pt, 0.0), classify(&beta, pt, 0.0));
        }
    }

    #[test]
    fn strong_only_strictly_inside(v in proptest::collection::vec(-0.9f64..1.0, 1..6)) {
        let alpha = TypeMultiIndex::new(v).unwrap();
        if let Exponents::Pencil(e) = exponents(&alpha, 0.0) {
            for pt in points(e.p0, e.p1) {
                let r = classify(&alpha, pt, 0.0).regime;
                let inside = matches!(pt, PencilPoint::Lp { p } if p > e.p0 && p < e.p1);
                prop_assert_eq!(r == Regime::Strong, inside);
            }
            if e.tilde_d == 1 {
                prop_assert_eq!(classify(&alpha, PencilPoint::P1Endpoint, 0.0).regime, Regime::WeakP1);
                prop_assert_eq!(classify(&alpha, PencilPoint::P0Endpoint, 0.0).regime, Regime::RestrictedWeakP0);
            }
        }
    }
}
