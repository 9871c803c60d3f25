//! The one-dimensional Laguerre heat kernel `H_t^a(ξ, η)`, its tensor
//! product, the comparison pieces `D`/`E`, and the two-sided envelopes.
//!
//! Everything is assembled in log space:
//!
//! ```text
//! ln H = (1+a)t - ln(2 sinh t) - (√ξ - √η)² / (2 sinh t)
//!        - tanh(t/2)(ξ+η)/2 + [ln I_a(z) - z],      z = √(ξη)/sinh t
//! ```
//!
//! which is free of cancellation for every `t > 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::specfun::BesselOrder;

/// Type parameter `a` and time `t` of the 1-D kernel, with the
/// `t`-dependent constants precomputed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams1D {
    a: f64,
    t: f64,
    order: BesselOrder,
    /// `ln(2 sinh t)`
    ln_2sinh: f64,
    /// `1 / (2 sinh t)`
    inv_2sinh: f64,
    /// `tanh(t/2) / 2`
    half_tanh: f64,
}

impl KernelParams1D {
    pub fn new(a: f64, t: f64) -> Result<Self> {
        let order = BesselOrder::new(a)?;
        if !(t > 0.0) || !t.is_finite() {
            return domain(format!("kernel time must be positive, got {t}"));
        }
        let one_minus = -(-2.0 * t).exp_m1();
        Ok(Self {
            a,
            t,
            order,
            ln_2sinh: t + one_minus.ln(),
            inv_2sinh: (-t).exp() / one_minus,
            half_tanh: 0.5 * (0.5 * t).tanh(),
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn sinh_t(&self) -> f64 {
        0.5 / self.inv_2sinh
    }

    fn ln_sinh(&self) -> f64 {
        self.ln_2sinh - std::f64::consts::LN_2
    }

    /// `ln H_t^a(ξ, η)`.
    pub fn log_h(&self, xi: f64, eta: f64) -> f64 {
        debug_assert!(xi > 0.0 && eta > 0.0);
        let (sx, se) = (xi.sqrt(), eta.sqrt());
        let z = (2.0 * sx * se * self.inv_2sinh).max(f64::MIN_POSITIVE);
        (1.0 + self.a) * self.t - self.ln_2sinh - (sx - se).powi(2) * self.inv_2sinh
            - self.half_tanh * (xi + eta)
            + self.order.log_scaled(z)
    }

    /// `H_t^a(ξ, η)`; may underflow to zero far from the diagonal.
    pub fn h(&self, xi: f64, eta: f64) -> f64 {
        self.log_h(xi, eta).exp()
    }

    pub fn regime(&self, xi: f64, eta: f64) -> Regime {
        if (xi * eta).sqrt() <= self.sinh_t() {
            Regime::D
        } else {
            Regime::E
        }
    }

    /// Points in `η` where `η ↦ H(ξ, η)` changes scale: the Gaussian window
    /// around `ξ` in `√η` and the exponential decay length.
    pub fn eta_hints(&self, xi: f64) -> Vec<f64> {
        let sigma = self.sinh_t().sqrt();
        let sx = xi.sqrt();
        let decay = 1.0 / self.half_tanh;
        let mut hints = vec![xi];
        for k in [-8.0, -4.0, -2.0, -1.0, 1.0, 2.0, 4.0, 8.0] {
            let s = sx + k * sigma;
            if s > 0.0 {
                hints.push(s * s);
            }
        }
        for k in [1.0, 4.0, 16.0] {
            hints.push(xi + k * decay);
        }
        hints.retain(|h| h.is_finite());
        hints
    }

    /// Minimum marching step into an infinite upper limit.
    pub fn tail_scale(&self) -> f64 {
        (4.0 * self.sinh_t()).min(2.0 / self.half_tanh)
    }
}

/// Which comparison piece the kernel is equivalent to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `√(ξη) <= sinh t`
    D,
    /// `√(ξη) > sinh t`
    E,
}

pub fn h1d(p: &KernelParams1D, xi: f64, eta: f64) -> f64 {
    p.h(xi, eta)
}

/// `e^{(1+a)t} (sinh t)^{-(a+1)} (ξη)^{a/2} e^{-coth t (ξ+η)/2}`
pub fn d_piece(p: &KernelParams1D, xi: f64, eta: f64) -> f64 {
    let a = p.a;
    let coth = 1.0 / p.t.tanh();
    ((1.0 + a) * p.t - (a + 1.0) * p.ln_sinh() + 0.5 * a * (xi * eta).ln() - 0.5 * coth * (xi + eta))
        .exp()
}

/// `E` piece, in the cancellation-free form
/// `e^{(1+a)t} (sinh t)^{-1/2} (ξη)^{-1/4}
///  exp(-(ξ-η)²/((√ξ+√η)² 2 sinh t)) exp((1 - cosh t)(ξ+η)/(2 sinh t))`.
pub fn e_piece(p: &KernelParams1D, xi: f64, eta: f64) -> f64 {
    let s = (xi.sqrt() + eta.sqrt()).powi(2);
    ((1.0 + p.a) * p.t - 0.5 * p.ln_sinh() - 0.25 * (xi * eta).ln()
        - (xi - eta).powi(2) / s * p.inv_2sinh
        - p.half_tanh * (xi + eta))
        .exp()
}

/// `E` piece in its original form, `-coth t (ξ+η)/2 + √(ξη)/sinh t` in the
/// exponent. Used to cross-check [`e_piece`].
pub fn e_piece_direct(p: &KernelParams1D, xi: f64, eta: f64) -> f64 {
    let coth = 1.0 / p.t.tanh();
    ((1.0 + p.a) * p.t - 0.5 * p.ln_sinh() - 0.25 * (xi * eta).ln() - 0.5 * coth * (xi + eta)
        + 2.0 * (xi * eta).sqrt() * p.inv_2sinh)
        .exp()
}

/// Type multi-index `α ∈ (-1, ∞)^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TypeMultiIndex {
    alpha: Vec<f64>,
}

impl TryFrom<Vec<f64>> for TypeMultiIndex {
    type Error = crate::Error;

    fn try_from(alpha: Vec<f64>) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<TypeMultiIndex> for Vec<f64> {
    fn from(t: TypeMultiIndex) -> Self {
        t.alpha
    }
}

impl TypeMultiIndex {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return domain("type multi-index needs at least one component");
        }
        if let Some(bad) = alpha.iter().find(|&&a| !(a > -1.0) || !a.is_finite()) {
            return domain(format!("type components must exceed -1, got {bad}"));
        }
        Ok(Self { alpha })
    }

    /// `d` copies of the same type.
    pub fn uniform(d: usize, a: f64) -> Result<Self> {
        Self::new(vec![a; d])
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.alpha
    }

    /// `α̃ = min_j α_j`.
    pub fn min(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `d̃`: number of components within `tol` of the minimum.
    pub fn min_multiplicity(&self, tol: f64) -> usize {
        let m = self.min();
        self.alpha.iter().filter(|&&a| a <= m + tol).count()
    }

    /// Indices of the minimal components.
    pub fn minimal_indices(&self, tol: f64) -> Vec<usize> {
        let m = self.min();
        (0..self.dim()).filter(|&j| self.alpha[j] <= m + tol).collect()
    }

    /// `|α| = Σ α_j`.
    pub fn abs_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// `H_t^α(x, y) = Π_j H_t^{α_j}(x_j, y_j)`.
pub fn h_product(alpha: &TypeMultiIndex, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != alpha.dim() || y.len() != alpha.dim() {
        return domain("point dimension does not match the type multi-index");
    }
    let mut log = 0.0;
    for (j, &a) in alpha.components().iter().enumerate() {
        log += KernelParams1D::new(a, t)?.log_h(x[j], y[j]);
    }
    Ok(log.exp())
}

/// Two-term upper envelope with explicit decay constants:
///
/// ```text
/// scale * [ (tξ)^{-1/2} e^{-c_gauss (ξ-η)²/(tξ)} e^{-c_gauss t(ξ+η)}
///         + (ξη)^{a/2} t^{-(a+1)} e^{-c_tail (ξ+η)/t} ]
/// ```
///
/// with `t` replaced by `min(t, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub c_gauss: f64,
    pub c_tail: f64,
    pub scale: f64,
}

impl Default for Envelope {
    /// Decay pair selected by [`calibrate_sandwich`] on the default cloud for
    /// every `a` in {-0.9, -0.5, 0, 1}; the scale covers all four fits.
    fn default() -> Self {
        Self { c_gauss: 1.0 / 32.0, c_tail: 1.0 / 8.0, scale: 1.25 }
    }
}

impl Envelope {
    /// Logs of the two terms, without `scale`.
    pub fn log_terms(&self, p: &KernelParams1D, xi: f64, eta: f64) -> (f64, f64) {
        let a = p.a;
        let t = p.t.min(1.0);
        let gauss = -0.5 * (t * xi).ln() - self.c_gauss * (xi - eta).powi(2) / (t * xi)
            - self.c_gauss * t * (xi + eta);
        let tail = 0.5 * a * (xi * eta).ln() - (a + 1.0) * t.ln() - self.c_tail * (xi + eta) / t;
        (gauss, tail)
    }

    pub fn log_eval(&self, p: &KernelParams1D, xi: f64, eta: f64) -> f64 {
        let (g, d) = self.log_terms(p, xi, eta);
        let m = g.max(d);
        self.scale.ln() + m + ((g - m).exp() + (d - m).exp()).ln()
    }

    pub fn eval(&self, p: &KernelParams1D, xi: f64, eta: f64) -> f64 {
        self.log_eval(p, xi, eta).exp()
    }
}

pub fn upper_envelope(p: &KernelParams1D, env: &Envelope, xi: f64, eta: f64) -> f64 {
    env.eval(p, xi, eta)
}

/// Near-diagonal lower bound: `1` when `t <= 1/4`, `1/(2t) <= ξ <= 2/t` and
/// `|ξ - η| < 1`. The window is closed in `ξ`; the kernel is continuous, so
/// the bound extends to the boundary.
pub fn lower_bound_a(p: &KernelParams1D, xi: f64, eta: f64) -> Option<f64> {
    let t = p.t;
    (t <= 0.25 && xi >= 0.5 / t && xi <= 2.0 / t && (xi - eta).abs() < 1.0).then_some(1.0)
}

/// Small-argument lower bound: `(ξη)^{a/2} / t^{a+1}` when `t <= 1` and
/// `ξ, η < 2t`.
pub fn lower_bound_b(p: &KernelParams1D, xi: f64, eta: f64) -> Option<f64> {
    let (a, t) = (p.a, p.t);
    (t <= 1.0 && xi > 0.0 && eta > 0.0 && xi < 2.0 * t && eta < 2.0 * t)
        .then(|| (0.5 * a * (xi * eta).ln() - (a + 1.0) * t.ln()).exp())
}

/// Sample cloud for the sandwich calibration: `n` log-uniform triples plus
/// `n / 10` dedicated samples inside each lower-bound window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichCloud {
    pub n: usize,
    pub seed: u64,
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
}

impl Default for SandwichCloud {
    fn default() -> Self {
        Self { n: 100_000, seed: 0x5eed_0001, t_range: (1e-3, 1.0), x_range: (1e-4, 1e4) }
    }
}

impl SandwichCloud {
    pub fn doubled(&self) -> Self {
        Self { n: 2 * self.n, seed: self.seed ^ 0x9e37_79b9_7f4a_7c15, ..self.clone() }
    }

    fn samples(&self) -> Vec<(f64, f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let log_uniform = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| {
            (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
        };
        let mut out = Vec::with_capacity(self.n + self.n / 5);
        for _ in 0..self.n {
            let t = log_uniform(self.t_range.0, self.t_range.1, &mut rng);
            let xi = log_uniform(self.x_range.0, self.x_range.1, &mut rng);
            let eta = log_uniform(self.x_range.0, self.x_range.1, &mut rng);
            out.push((t, xi, eta));
        }
        for _ in 0..self.n / 10 {
            let t = log_uniform(self.t_range.0, 0.25, &mut rng);
            let xi = log_uniform(0.5 / t, 2.0 / t, &mut rng);
            let eta = (xi + (2.0 * rng.random::<f64>() - 1.0)).max(f64::MIN_POSITIVE);
            out.push((t, xi, eta));
        }
        for _ in 0..self.n / 10 {
            let t = log_uniform(self.t_range.0, self.t_range.1, &mut rng);
            let lo = (2.0 * t * 1e-6).max(self.x_range.0.min(2.0 * t * 1e-3));
            let xi = log_uniform(lo, 2.0 * t, &mut rng);
            let eta = log_uniform(lo, 2.0 * t, &mut rng);
            out.push((t, xi, eta));
        }
        out
    }
}

/// Outcome of fitting `c_a·lb_a`, `c_b·lb_b <= H <= C·U` on a cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichFit {
    pub a: f64,
    pub envelope: Envelope,
    /// Largest admissible constant for the near-diagonal bound.
    pub c_lower_a: f64,
    /// Largest admissible constant for the small-argument bound.
    pub c_lower_b: f64,
    /// Doubled-cloud refit of the three constants.
    pub refit: (f64, f64, f64),
    pub samples: usize,
    pub violations: usize,
}

impl SandwichFit {
    /// Largest relative drift of a constant under the doubled refit.
    pub fn max_drift(&self) -> f64 {
        [
            (self.envelope.scale, self.refit.0),
            (self.c_lower_a, self.refit.1),
            (self.c_lower_b, self.refit.2),
        ]
        .iter()
        .map(|(x, y)| (y / x - 1.0).abs())
        .fold(0.0, f64::max)
    }
}

/// Decay constants scanned by the calibration.
pub const DECAY_GRID: [f64; 5] = [1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 3.0 / 8.0];

struct CloudStats {
    /// `max ln(H/U)` for each decay pair, row-major over `DECAY_GRID²`.
    log_upper: Vec<f64>,
    log_lower_a: f64,
    log_lower_b: f64,
}

fn cloud_stats(a: f64, samples: &[(f64, f64, f64)]) -> Result<CloudStats> {
    let pairs: Vec<Envelope> = DECAY_GRID
        .iter()
        .flat_map(|&g| DECAY_GRID.iter().map(move |&d| Envelope { c_gauss: g, c_tail: d, scale: 1.0 }))
        .collect();
    // Fixed-size chunks keep the merge order independent of the thread count.
    let partials: Vec<Result<CloudStats>> = samples
        .par_chunks(4096)
        .map(|chunk| {
            let mut st = CloudStats {
                log_upper: vec![f64::NEG_INFINITY; pairs.len()],
                log_lower_a: f64::INFINITY,
                log_lower_b: f64::INFINITY,
            };
            for &(t, xi, eta) in chunk {
                let p = KernelParams1D::new(a, t)?;
                let lh = p.log_h(xi, eta);
                for (slot, env) in st.log_upper.iter_mut().zip(&pairs) {
                    *slot = slot.max(lh - env.log_eval(&p, xi, eta));
                }
                if let Some(lb) = lower_bound_a(&p, xi, eta) {
                    st.log_lower_a = st.log_lower_a.min(lh - lb.ln());
                }
                if lower_bound_b(&p, xi, eta).is_some() {
                    let log_lb = 0.5 * a * (xi * eta).ln() - (a + 1.0) * t.ln();
                    st.log_lower_b = st.log_lower_b.min(lh - log_lb);
                }
            }
            Ok(st)
        })
        .collect();
    let mut total = CloudStats {
        log_upper: vec![f64::NEG_INFINITY; pairs.len()],
        log_lower_a: f64::INFINITY,
        log_lower_b: f64::INFINITY,
    };
    for part in partials {
        let part = part?;
        for (x, y) in total.log_upper.iter_mut().zip(&part.log_upper) {
            *x = x.max(*y);
        }
        total.log_lower_a = total.log_lower_a.min(part.log_lower_a);
        total.log_lower_b = total.log_lower_b.min(part.log_lower_b);
    }
    Ok(total)
}

/// Fit the envelope and lower-bound constants for type `a`.
///
/// For every decay pair on [`DECAY_GRID`]² the smallest admissible `scale` is
/// computed on the cloud and on its doubled refit. Among the pairs whose
/// scale moves by at most `stability` the one with the fastest decay
/// (largest `c_gauss + c_tail`, then smallest scale) is kept.
pub fn calibrate_sandwich(a: f64, cloud: &SandwichCloud, stability: f64) -> Result<SandwichFit> {
    let base = cloud.samples();
    let doubled = cloud.doubled().samples();
    let s1 = cloud_stats(a, &base)?;
    let s2 = cloud_stats(a, &doubled)?;

    let mut best: Option<(usize, f64)> = None;
    for k in 0..s1.log_upper.len() {
        let (c1, c2) = (s1.log_upper[k].exp(), s2.log_upper[k].exp());
        if !(c1.is_finite() && c2.is_finite()) || (c2 / c1 - 1.0).abs() > stability {
            continue;
        }
        let (g, d) = (DECAY_GRID[k / DECAY_GRID.len()], DECAY_GRID[k % DECAY_GRID.len()]);
        let better = match best {
            None => true,
            Some((j, cj)) => {
                let (gj, dj) = (DECAY_GRID[j / DECAY_GRID.len()], DECAY_GRID[j % DECAY_GRID.len()]);
                (g + d, -c1) > (gj + dj, -cj)
            }
        };
        if better {
            best = Some((k, c1));
        }
    }
    // Without a stable pair fall back to the slowest decay.
    let (k, scale) = best.unwrap_or((0, s1.log_upper[0].exp()));
    let envelope = Envelope {
        c_gauss: DECAY_GRID[k / DECAY_GRID.len()],
        c_tail: DECAY_GRID[k % DECAY_GRID.len()],
        scale,
    };

    let c_lower_a = s1.log_lower_a.exp();
    let c_lower_b = s1.log_lower_b.exp();
    let violations = count_violations(a, &base, &envelope, c_lower_a, c_lower_b)?;
    Ok(SandwichFit {
        a,
        envelope,
        c_lower_a,
        c_lower_b,
        refit: (s2.log_upper[k].exp(), s2.log_lower_a.exp(), s2.log_lower_b.exp()),
        samples: base.len(),
        violations,
    })
}

/// Samples outside `c·lb <= H <= U`, compared in log space with a relative
/// slack of `1e-12`.
pub fn count_violations(
    a: f64,
    samples: &[(f64, f64, f64)],
    env: &Envelope,
    c_lower_a: f64,
    c_lower_b: f64,
) -> Result<usize> {
    let slack = 1e-12;
    let mut bad = 0;
    for &(t, xi, eta) in samples {
        let p = KernelParams1D::new(a, t)?;
        let lh = p.log_h(xi, eta);
        if lh > env.log_eval(&p, xi, eta) + slack {
            bad += 1;
        }
        if let Some(lb) = lower_bound_a(&p, xi, eta) {
            if lh < (c_lower_a * lb).ln() - slack {
                bad += 1;
            }
        }
        if lower_bound_b(&p, xi, eta).is_some() {
            let log_lb = c_lower_b.ln() + 0.5 * a * (xi * eta).ln() - (a + 1.0) * t.ln();
            if lh < log_lb - slack {
                bad += 1;
            }
        }
    }
    Ok(bad)
}
