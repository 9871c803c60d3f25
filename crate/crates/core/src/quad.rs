//! Globally adaptive Gauss–Kronrod (10/21) quadrature on the half line.
//!
//! Integrable power singularities at a finite endpoint are removed with the
//! substitution `x = lo + u^m`; infinite upper limits are truncated once the
//! integrand has fallen `TAIL_NATS` below its running maximum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208977430842,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

const TAIL_NATS: f64 = 40.0;
const MAX_TAIL_STEPS: usize = 200;

/// Tolerances and work limit for one adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 0.0, max_subdivisions: 4000 }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

/// Integration range with optional endpoint behaviour hints.
///
/// `lo_exponent = Some(e)` declares `f(x) ~ (x - lo)^e` near `lo`, likewise
/// for `hi_exponent` at a finite `hi`. `hints` are interior points where the
/// integrand changes scale. `tail_scale` is the initial step used to march
/// into an infinite upper limit.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub lo_exponent: Option<f64>,
    pub hi_exponent: Option<f64>,
    pub hints: Vec<f64>,
    pub tail_scale: f64,
}

impl Axis {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_exponent: None, hi_exponent: None, hints: Vec::new(), tail_scale: 1.0 }
    }

    pub fn lo_exponent(mut self, e: f64) -> Self {
        self.lo_exponent = Some(e);
        self
    }

    pub fn hi_exponent(mut self, e: f64) -> Self {
        self.hi_exponent = Some(e);
        self
    }

    pub fn hints(mut self, hints: impl IntoIterator<Item = f64>) -> Self {
        self.hints.extend(hints);
        self
    }

    pub fn tail_scale(mut self, s: f64) -> Self {
        self.tail_scale = s;
        self
    }
}

/// Substitution exponent removing an `x^e` endpoint singularity.
fn power_for(e: Option<f64>) -> u32 {
    match e {
        Some(e) if e < 0.0 => ((2.0 / (e + 1.0)).ceil() as u32).clamp(2, 64),
        _ => 1,
    }
}

#[derive(Clone, Copy, Debug)]
enum Map {
    Identity,
    /// `x = origin + u^m`
    FromLeft { origin: f64, m: u32 },
    /// `x = origin - u^m`
    FromRight { origin: f64, m: u32 },
}

impl Map {
    fn x(&self, u: f64) -> f64 {
        match *self {
            Map::Identity => u,
            Map::FromLeft { origin, m } => origin + u.powi(m as i32),
            Map::FromRight { origin, m } => origin - u.powi(m as i32),
        }
    }

    fn jacobian(&self, u: f64) -> f64 {
        match *self {
            Map::Identity => 1.0,
            Map::FromLeft { m, .. } | Map::FromRight { m, .. } => {
                m as f64 * u.powi(m as i32 - 1)
            }
        }
    }

    /// Inverse image of the x-interval `[a, b]`, ordered in u.
    fn u_range(&self, a: f64, b: f64) -> (f64, f64) {
        match *self {
            Map::Identity => (a, b),
            Map::FromLeft { origin, m } => {
                ((a - origin).max(0.0).powf(1.0 / m as f64), (b - origin).powf(1.0 / m as f64))
            }
            Map::FromRight { origin, m } => {
                ((origin - b).max(0.0).powf(1.0 / m as f64), (origin - a).powf(1.0 / m as f64))
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    map: Map,
    value: f64,
    err: f64,
}

impl Segment {
    fn x_bounds(&self) -> (f64, f64) {
        let (p, q) = (self.map.x(self.a), self.map.x(self.b));
        (p.min(q), p.max(q))
    }
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, map: Map, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let g = |u: f64| {
        let v = f(map.x(u)) * map.jacobian(u);
        if v.is_finite() { v } else { 0.0 }
    };
    let fc = g(center);
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv = [(0.0, 0.0); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = g(center - dx);
        let f2 = g(center + dx);
        fv[j] = (f1, f2);
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err)
}

/// Adaptive integration of `f` over the x-pieces `[x_i, x_{i+1}]`, each
/// carrying its own variable substitution.
fn adapt<F: Fn(f64) -> f64>(f: &F, pieces: &[(f64, f64, Map)], cfg: &QuadConfig) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut settled_value = 0.0;
    let mut settled_err = 0.0;
    let mut evaluations = 0;
    for &(xa, xb, map) in pieces {
        if !(xb > xa) {
            continue;
        }
        let (a, b) = map.u_range(xa, xb);
        let (value, err) = gk21(f, map, a, b);
        evaluations += 21;
        heap.push(Segment { a, b, map, value, err });
    }
    let mut subdivisions = 0;
    loop {
        let total: f64 = settled_value + heap.iter().map(|s| s.value).sum::<f64>();
        let err: f64 = settled_err + heap.iter().map(|s| s.err).sum::<f64>();
        if err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) || heap.is_empty() {
            return Ok(QuadResult { value: total, abs_error: err, evaluations });
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 1e-14 * mid.abs() {
            // Unsplittable at double precision: accept as is.
            settled_value += worst.value;
            settled_err += worst.err;
            continue;
        }
        if subdivisions >= cfg.max_subdivisions {
            let (lo, hi) = worst.x_bounds();
            return Err(Error::QuadratureNonconvergence { lo, hi, value: total, err });
        }
        subdivisions += 1;
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, err) = gk21(f, worst.map, a, b);
            evaluations += 21;
            heap.push(Segment { a, b, map: worst.map, value, err });
        }
    }
}

/// Integrate `f` over `[a, b]` without endpoint information.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    integrate_axis(f, &Axis::new(a, b), cfg)
}

/// Integrate `f` over an [`Axis`], honouring its hints and endpoint exponents.
pub fn integrate_axis<F: Fn(f64) -> f64>(f: F, axis: &Axis, cfg: &QuadConfig) -> Result<QuadResult> {
    let (lo, hi) = (axis.lo, axis.hi);
    if !(lo.is_finite() && hi > lo) {
        if hi == lo {
            return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
        }
        return Err(Error::Domain(format!("invalid integration range [{lo}, {hi}]")));
    }
    let mut points: Vec<f64> = std::iter::once(lo)
        .chain(axis.hints.iter().copied().filter(|&h| h > lo && h < hi && h.is_finite()))
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup_by(|p, q| (*p - *q).abs() <= 1e-15 * q.abs().max(f64::MIN_POSITIVE));

    if hi.is_finite() {
        points.push(hi);
    } else {
        points = truncate_tail(&f, points, axis.tail_scale)?;
    }
    if points.len() < 2 {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
    }

    let m_lo = power_for(axis.lo_exponent);
    let m_hi = if hi.is_finite() { power_for(axis.hi_exponent) } else { 1 };
    let n = points.len() - 1;
    let mut pieces = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, b) = (points[i], points[i + 1]);
        let first = i == 0 && m_lo > 1;
        let last = i == n - 1 && m_hi > 1;
        if first && last {
            let mid = 0.5 * (a + b);
            pieces.push((a, mid, Map::FromLeft { origin: a, m: m_lo }));
            pieces.push((mid, b, Map::FromRight { origin: b, m: m_hi }));
        } else if first {
            pieces.push((a, b, Map::FromLeft { origin: a, m: m_lo }));
        } else if last {
            pieces.push((a, b, Map::FromRight { origin: b, m: m_hi }));
        } else {
            pieces.push((a, b, Map::Identity));
        }
    }
    adapt(&f, &pieces, cfg)
}

/// Replace an infinite upper limit by a finite one. Points beyond the first
/// one (after the running maximum) where `|f|` is below the threshold are
/// dropped, and the gap is bridged by a doubling march.
fn truncate_tail<F: Fn(f64) -> f64>(f: &F, points: Vec<f64>, tail_scale: f64) -> Result<Vec<f64>> {
    let eval = |x: f64| {
        let v = f(x).abs();
        if v.is_finite() { v } else { 0.0 }
    };
    let mut samples: Vec<f64> = Vec::with_capacity(2 * points.len());
    for (i, &p) in points.iter().enumerate() {
        if i > 0 {
            samples.push(eval(0.5 * (points[i - 1] + p)));
        }
        samples.push(if i == 0 { 0.0 } else { eval(p) });
    }
    let fmax = samples.iter().copied().fold(0.0, f64::max);
    let threshold = fmax * (-TAIL_NATS).exp();
    let argmax = samples.iter().position(|&v| v == fmax).unwrap_or(0) / 2;

    let mut kept = Vec::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        if i > argmax && i > 0 && samples[2 * i] <= threshold && fmax > 0.0 {
            kept.push(p);
            return Ok(kept);
        }
        kept.push(p);
    }

    let n = kept.len();
    let last = kept[n - 1];
    let mut step = if n >= 2 { (last - kept[n - 2]).max(tail_scale) } else { tail_scale };
    if !(step > 0.0) {
        step = 1.0;
    }
    let mut x = last;
    let mut running = fmax;
    for _ in 0..MAX_TAIL_STEPS {
        x += step;
        step *= 2.0;
        let v = eval(x);
        kept.push(x);
        if v > running {
            running = v;
            continue;
        }
        if v <= running * (-TAIL_NATS).exp() {
            return Ok(kept);
        }
    }
    Err(Error::QuadratureNonconvergence { lo: last, hi: x, value: f64::NAN, err: f64::INFINITY })
}

/// Integral over the open simplex `{θ_i > 0, Σθ_i = 1}` in `dim` barycentric
/// coordinates, parametrized by its first `dim - 1` coordinates.
///
/// `edge_exponent` describes the integrand's behaviour as any coordinate
/// tends to zero; it only steers the endpoint substitution.
pub fn integrate_simplex<F: Fn(&[f64]) -> f64>(
    dim: usize,
    f: F,
    edge_exponent: Option<f64>,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    assert!(dim >= 1);
    if dim == 1 {
        return Ok(QuadResult { value: f(&[1.0]), abs_error: 0.0, evaluations: 1 });
    }
    simplex_level(&f, &[], dim, 1.0, edge_exponent, cfg)
}

fn simplex_level<F: Fn(&[f64]) -> f64>(
    f: &F,
    prefix: &[f64],
    dim: usize,
    remaining: f64,
    e: Option<f64>,
    cfg: &QuadConfig,
) -> Result<QuadResult> {
    let e = e.unwrap_or(0.0);
    let axis = Axis::new(0.0, remaining).lo_exponent(e).hi_exponent(e);
    let failure = std::cell::RefCell::new(None::<Error>);
    let inner = |x: f64| -> f64 {
        let mut theta = Vec::with_capacity(dim);
        theta.extend_from_slice(prefix);
        theta.push(x);
        if theta.len() + 1 == dim {
            theta.push((remaining - x).max(0.0));
            return f(&theta);
        }
        match simplex_level(f, &theta, dim, remaining - x, Some(e), cfg) {
            Ok(r) => r.value,
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                0.0
            }
        }
    };
    let r = integrate_axis(inner, &axis, cfg)?;
    match failure.into_inner() {
        Some(err) => Err(err),
        None => Ok(r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig {
        QuadConfig::with_rel_tol(1e-11)
    }

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, &cfg()).unwrap();
        assert!((r.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_power_singularity() {
        for e in [-0.9, -0.5, -0.25] {
            let axis = Axis::new(0.0, 1.0).lo_exponent(e);
            let r = integrate_axis(|x: f64| x.powf(e), &axis, &cfg()).unwrap();
            assert!((r.value - 1.0 / (e + 1.0)).abs() < 1e-9 * (1.0 / (e + 1.0)), "e={e}");
        }
        let axis = Axis::new(0.0, 1.0).hi_exponent(-0.5);
        let r = integrate_axis(|x: f64| (1.0 - x).powf(-0.5), &axis, &cfg()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infinite_tail_with_narrow_peak() {
        let axis = Axis::new(0.0, f64::INFINITY).hints([50.0, 49.9, 50.1]).tail_scale(0.1);
        let r = integrate_axis(|x: f64| (-(x - 50.0).powi(2) / 0.005).exp(), &axis, &cfg()).unwrap();
        let want = (std::f64::consts::PI * 0.005).sqrt();
        assert!((r.value / want - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gamma_integral_on_half_line() {
        let axis = Axis::new(0.0, f64::INFINITY).lo_exponent(-0.5).hints([1.0]);
        let r = integrate_axis(|x: f64| x.powf(-0.5) * (-x).exp(), &axis, &cfg()).unwrap();
        assert!((r.value / std::f64::consts::PI.sqrt() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nonconvergence_reports_worst_interval() {
        let tight = QuadConfig { rel_tol: 1e-15, abs_tol: 0.0, max_subdivisions: 3 };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-4, 1.0, &tight).unwrap_err();
        match err {
            Error::QuadratureNonconvergence { lo, hi, .. } => assert!(lo < hi && lo >= 1e-4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dirichlet_integral_on_simplex() {
        // ∫_Δ θ1^{-1/3} θ2^{-1/3} θ3^{-1/3} = Γ(2/3)^3 / Γ(2)
        let r = integrate_simplex(
            3,
            |t: &[f64]| t.iter().map(|v| v.powf(-1.0 / 3.0)).product(),
            Some(-1.0 / 3.0),
            &QuadConfig::with_rel_tol(1e-9),
        )
        .unwrap();
        let want = crate::specfun::gamma(2.0 / 3.0).powi(3);
        assert!((r.value / want - 1.0).abs() < 1e-7, "{} vs {want}", r.value);
    }
}
