//! Critical exponents and the boundedness classification of the maximal
//! operator as a function of the type multi-index and the exponent `p`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kernel::TypeMultiIndex;

/// Exponents attached to a type whose minimal component is negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PencilExponents {
    pub tilde_alpha: f64,
    pub tilde_d: usize,
    pub p0: f64,
    pub p1: f64,
}

impl PencilExponents {
    /// From a negative minimal type `a ∈ (-1, 0)` with multiplicity `tilde_d`.
    pub fn from_min(tilde_alpha: f64, tilde_d: usize) -> Result<Self> {
        if !(tilde_alpha > -1.0 && tilde_alpha < 0.0) || tilde_d == 0 {
            return domain(format!("pencil exponents need a minimal type in (-1, 0), got {tilde_alpha}"));
        }
        Ok(Self { tilde_alpha, tilde_d, p0: 2.0 / (2.0 + tilde_alpha), p1: -2.0 / tilde_alpha })
    }

    /// `N = d̃ - 1`, the power of the logarithm at the endpoints.
    pub fn log_power(&self) -> usize {
        self.tilde_d - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Exponents {
    Pencil(PencilExponents),
    /// `α̃ >= 0`: bounded on `L^p` for `1 < p <= ∞` and weak type (1,1).
    Standard { tilde_alpha: f64 },
}

/// `α̃`, `d̃` and the critical exponents. Components within `min_tol` of the
/// minimum count as minimal; `0` means exact equality.
pub fn exponents(alpha: &TypeMultiIndex, min_tol: f64) -> Exponents {
    let tilde_alpha = alpha.min();
    if tilde_alpha >= 0.0 {
        return Exponents::Standard { tilde_alpha };
    }
    let tilde_d = alpha.min_multiplicity(min_tol);
    Exponents::Pencil(PencilExponents::from_min(tilde_alpha, tilde_d).expect("type components exceed -1"))
}

/// A point on the exponent axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PencilPoint {
    /// Plain `L^p`, `1 <= p <= ∞`.
    Lp { p: f64 },
    P0Endpoint,
    P1Endpoint,
    /// Lorentz space `L^{p,q}`; only `q = p` is decided by the classification.
    Lorentz { p: f64, q: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Strong,
    WeakP1,
    RestrictedWeakP0,
    LogWeakP1,
    LogRestrictedWeakP0,
    Unbounded,
    StandardWeak11,
    StandardStrong,
    NotCovered,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Strong => "strong",
            Regime::WeakP1 => "weak-p1",
            Regime::RestrictedWeakP0 => "restricted-weak-p0",
            Regime::LogWeakP1 => "log-weak-p1",
            Regime::LogRestrictedWeakP0 => "log-restricted-weak-p0",
            Regime::Unbounded => "unbounded",
            Regime::StandardWeak11 => "standard-weak-11",
            Regime::StandardStrong => "standard-strong",
            Regime::NotCovered => "not-covered",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    /// `N = d̃ - 1` for the logarithmic regimes.
    pub log_power: Option<usize>,
}

impl RegimeVerdict {
    fn plain(regime: Regime) -> Self {
        Self { regime, log_power: None }
    }
}

/// Relative tolerance under which a numeric `p` is identified with an endpoint.
const ENDPOINT_RTOL: f64 = 1e-12;

pub fn classify(alpha: &TypeMultiIndex, point: PencilPoint, min_tol: f64) -> RegimeVerdict {
    let d = alpha.dim();
    let ex = match exponents(alpha, min_tol) {
        Exponents::Standard { .. } => {
            return RegimeVerdict::plain(match point {
                PencilPoint::Lp { p } if p == 1.0 => Regime::StandardWeak11,
                PencilPoint::Lp { p } if p > 1.0 => Regime::StandardStrong,
                PencilPoint::Lorentz { p, q } if q == p && p > 1.0 => Regime::StandardStrong,
                _ => Regime::NotCovered,
            });
        }
        Exponents::Pencil(ex) => ex,
    };
    let near = |p: f64, e: f64| (p - e).abs() <= ENDPOINT_RTOL * e;
    let at = match point {
        PencilPoint::P0Endpoint => Some(false),
        PencilPoint::P1Endpoint => Some(true),
        PencilPoint::Lp { p } | PencilPoint::Lorentz { p, .. } if near(p, ex.p1) => Some(true),
        PencilPoint::Lp { p } | PencilPoint::Lorentz { p, .. } if near(p, ex.p0) => Some(false),
        _ => None,
    };
    if let PencilPoint::Lorentz { p, q } = point {
        if q != p {
            return RegimeVerdict::plain(Regime::NotCovered);
        }
    }
    match at {
        None => {
            let p = match point {
                PencilPoint::Lp { p } | PencilPoint::Lorentz { p, .. } => p,
                _ => unreachable!(),
            };
            RegimeVerdict::plain(if p > ex.p0 && p < ex.p1 { Regime::Strong } else { Regime::Unbounded })
        }
        Some(upper) => {
            if ex.tilde_d == 1 {
                RegimeVerdict::plain(if upper { Regime::WeakP1 } else { Regime::RestrictedWeakP0 })
            } else if d <= 3 {
                RegimeVerdict {
                    regime: if upper { Regime::LogWeakP1 } else { Regime::LogRestrictedWeakP0 },
                    log_power: Some(ex.log_power()),
                }
            } else {
                RegimeVerdict::plain(Regime::Unbounded)
            }
        }
    }
}

/// One cell of the `(α, 1/p)` regime diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub inv_p: f64,
    pub regime: Regime,
    pub log_power: Option<usize>,
}

/// Regimes of the uniform type `(a, …, a) ∈ ℝ^d` over a grid of `a` and
/// `1/p`; for negative `a` the two endpoints are added as extra rows.
pub fn pencil_sweep(d: usize, alphas: &[f64], inv_ps: &[f64], min_tol: f64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &a in alphas {
        let alpha = TypeMultiIndex::uniform(d, a)?;
        let mut pts: Vec<(f64, PencilPoint)> = inv_ps
            .iter()
            .filter(|&&s| s > 0.0 && s <= 1.0)
            .map(|&s| (s, PencilPoint::Lp { p: 1.0 / s }))
            .collect();
        if a < 0.0 {
            pts.push((-a / 2.0, PencilPoint::P1Endpoint));
            pts.push((1.0 + a / 2.0, PencilPoint::P0Endpoint));
        }
        pts.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (inv_p, pt) in pts {
            let v = classify(&alpha, pt, min_tol);
            rows.push(SweepRow { alpha: a, inv_p, regime: v.regime, log_power: v.log_power });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ty(v: &[f64]) -> TypeMultiIndex {
        TypeMultiIndex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn exponent_examples() {
        match exponents(&ty(&[-0.5]), 0.0) {
            Exponents::Pencil(e) => {
                assert_eq!(e.p1, 4.0);
                assert!((e.p0 - 4.0 / 3.0).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        match exponents(&ty(&[-0.5, 0.2, -0.5]), 0.0) {
            Exponents::Pencil(e) => {
                assert_eq!((e.tilde_alpha, e.tilde_d, e.p1), (-0.5, 2, 4.0));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(exponents(&ty(&[0.0, 3.0]), 0.0), Exponents::Standard { .. }));
    }

    #[test]
    fn classification_examples() {
        let v = classify(&ty(&[-0.5, -0.5]), PencilPoint::P1Endpoint, 0.0);
        assert_eq!((v.regime, v.log_power), (Regime::LogWeakP1, Some(1)));
        let v = classify(&ty(&[-0.5; 4]), PencilPoint::P1Endpoint, 0.0);
        assert_eq!(v.regime, Regime::Unbounded);
        let v = classify(&ty(&[-0.5, 0.0]), PencilPoint::Lp { p: 2.0 }, 0.0);
        assert_eq!(v.regime, Regime::Strong);
        let v = classify(&ty(&[-0.5]), PencilPoint::Lp { p: 5.0 }, 0.0);
        assert_eq!(v.regime, Regime::Unbounded);
        let v = classify(&ty(&[-0.5, 0.1]), PencilPoint::P0Endpoint, 0.0);
        assert_eq!(v.regime, Regime::RestrictedWeakP0);
        let v = classify(&ty(&[-0.5, -0.5, -0.5]), PencilPoint::P0Endpoint, 0.0);
        assert_eq!((v.regime, v.log_power), (Regime::LogRestrictedWeakP0, Some(2)));
        let v = classify(&ty(&[-0.5]), PencilPoint::Lp { p: 4.0 }, 0.0);
        assert_eq!(v.regime, Regime::WeakP1);
    }

    #[test]
    fn standard_branch() {
        assert_eq!(classify(&ty(&[0.0, 1.0]), PencilPoint::Lp { p: 1.0 }, 0.0).regime, Regime::StandardWeak11);
        assert_eq!(classify(&ty(&[0.0]), PencilPoint::Lp { p: f64::INFINITY }, 0.0).regime, Regime::StandardStrong);
    }

    #[test]
    fn lorentz_refinements_are_not_covered() {
        let v = classify(&ty(&[-0.5]), PencilPoint::Lorentz { p: 4.0, q: 2.0 }, 0.0);
        assert_eq!(v.regime, Regime::NotCovered);
    }

    #[test]
    fn tolerance_merges_near_minimal_components() {
        let a = ty(&[-0.5, -0.5 + 1e-9]);
        assert_eq!(classify(&a, PencilPoint::P1Endpoint, 0.0).regime, Regime::WeakP1);
        assert_eq!(classify(&a, PencilPoint::P1Endpoint, 1e-6).regime, Regime::LogWeakP1);
    }

    #[test]
    fn sweep_contains_endpoints() {
        let rows = pencil_sweep(1, &[-0.5, 0.5], &[0.1, 0.5, 0.9], 0.0).unwrap();
        assert!(rows.iter().any(|r| r.alpha == -0.5 && r.inv_p == 0.25 && r.regime == Regime::WeakP1));
        assert!(rows.iter().any(|r| r.alpha == -0.5 && r.inv_p == 0.75 && r.regime == Regime::RestrictedWeakP0));
        assert!(rows.iter().filter(|r| r.alpha == 0.5).all(|r| r.regime == Regime::StandardStrong));
    }
}
