//! Kernel integrals `∫ H_t^α(x, y) f(y) dy` over separable functions, the
//! semigroup `T_t^α`, the maximal operator `sup_t ∫ H_t^α |f|`, and the
//! centered Hardy–Littlewood maximal function on the half line.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{KernelParams1D, TypeMultiIndex};
use crate::quad::{integrate_axis, Axis, QuadConfig};
use crate::specfun::{laguerre_coefficients, LaguerreIndex};

/// One-dimensional factor of a separable function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Piece {
    /// Indicator of `(lo, hi)`.
    Box { lo: f64, hi: f64 },
    /// `x^p e^{-qx}` on `(lo, hi)`.
    PowerExp { p: f64, q: f64, lo: f64, hi: f64 },
    /// Linear interpolation of `values` at increasing `nodes`, zero outside.
    Grid { nodes: Vec<f64>, values: Vec<f64> },
}

/// Grids with more nodes than this are not passed as quadrature hints.
const GRID_HINT_LIMIT: usize = 256;

impl Piece {
    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        let p = Piece::Box { lo, hi };
        p.validate()?;
        Ok(p)
    }

    pub fn power_exp(p: f64, q: f64, lo: f64, hi: f64) -> Result<Self> {
        let piece = Piece::PowerExp { p, q, lo, hi };
        piece.validate()?;
        Ok(piece)
    }

    pub fn grid(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let piece = Piece::Grid { nodes, values };
        piece.validate()?;
        Ok(piece)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo >= 0.0 && hi > lo) || lo.is_infinite() {
            return domain(format!("piece support must satisfy 0 <= lo < hi, got ({lo}, {hi})"));
        }
        match self {
            Piece::Box { hi, .. } if hi.is_infinite() => {
                domain("box pieces must be bounded; use a power-exponential with q > 0")
            }
            Piece::PowerExp { q, hi, .. } if hi.is_infinite() && !(*q > 0.0) => {
                domain("an unbounded power-exponential piece needs q > 0")
            }
            Piece::PowerExp { p, lo, .. } if *lo == 0.0 && !(*p > -1.0) => {
                domain(format!("x^{p} is not locally integrable at 0"))
            }
            Piece::Grid { nodes, values } => {
                if nodes.len() < 2 || nodes.len() != values.len() {
                    return domain("grid pieces need at least two nodes and matching values");
                }
                if nodes.windows(2).any(|w| !(w[1] > w[0])) {
                    return domain("grid nodes must be strictly increasing");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Piece::Box { lo, hi } | Piece::PowerExp { lo, hi, .. } => (*lo, *hi),
            Piece::Grid { nodes, .. } => (nodes[0], nodes[nodes.len() - 1]),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x > lo && x < hi) {
            // Grids include their end nodes.
            if let Piece::Grid { nodes, values } = self {
                if x == lo {
                    return values[0];
                }
                if x == hi {
                    return values[nodes.len() - 1];
                }
            }
            return 0.0;
        }
        match self {
            Piece::Box { .. } => 1.0,
            Piece::PowerExp { p, q, .. } => (p * x.ln() - q * x).exp(),
            Piece::Grid { nodes, values } => {
                let i = nodes.partition_point(|&n| n <= x).clamp(1, nodes.len() - 1);
                let w = (x - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
                values[i - 1] + w * (values[i] - values[i - 1])
            }
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            Piece::Grid { values, .. } => values.iter().all(|&v| v >= 0.0),
            _ => true,
        }
    }

    pub fn abs(&self) -> Piece {
        match self {
            Piece::Grid { nodes, values } => Piece::Grid {
                nodes: nodes.clone(),
                values: values.iter().map(|v| v.abs()).collect(),
            },
            other => other.clone(),
        }
    }

    /// Power behaviour at the left end of the support.
    fn lo_exponent(&self) -> f64 {
        match self {
            Piece::PowerExp { p, .. } => *p,
            _ => 0.0,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        let mut pts = vec![lo];
        if hi.is_finite() {
            pts.push(hi);
        }
        match self {
            Piece::Grid { nodes, .. } if nodes.len() <= GRID_HINT_LIMIT => pts.extend(nodes),
            Piece::PowerExp { p, q, .. } if *q > 0.0 => {
                pts.extend([1.0 / q, 10.0 / q]);
                if *p > 0.0 {
                    pts.push(p / q);
                }
            }
            _ => {}
        }
        pts
    }

    fn axis(&self) -> Axis {
        let (lo, hi) = self.support();
        let mut axis = Axis::new(lo, hi).hints(self.breakpoints());
        if let Piece::PowerExp { p, q, .. } = self {
            if lo == 0.0 {
                axis = axis.lo_exponent(*p);
            }
            if *q > 0.0 {
                axis = axis.tail_scale(1.0 / q);
            }
        }
        axis
    }

    /// `∫ |f|^p` raised to `1/p`.
    pub fn lp_norm(&self, p: f64, cfg: &QuadConfig) -> Result<f64> {
        if !(p >= 1.0) {
            return domain(format!("L^p norm needs p >= 1, got {p}"));
        }
        if let Piece::Box { lo, hi } = self {
            return Ok((hi - lo).powf(1.0 / p));
        }
        let (lo, _) = self.support();
        if lo == 0.0 && !(p * self.lo_exponent() > -1.0) {
            return Err(Error::NormDivergence(format!("|f|^{p} is not integrable at 0")));
        }
        let mut axis = self.axis();
        if lo == 0.0 {
            axis = axis.lo_exponent(p * self.lo_exponent());
        }
        let r = integrate_axis(|x| self.eval(x).abs().powf(p), &axis, cfg)
            .map_err(|e| Error::NormDivergence(format!("L^{p} quadrature failed: {e}")))?;
        Ok(r.value.powf(1.0 / p))
    }

    /// `|{x : |f(x)| > λ}|` for `λ >= 0`.
    pub fn distribution(&self, lambda: f64) -> f64 {
        let (lo, hi) = self.support();
        match self {
            Piece::Box { .. } => {
                if lambda < 1.0 {
                    hi - lo
                } else {
                    0.0
                }
            }
            Piece::PowerExp { p, q, .. } => power_exp_superlevel(*p, *q, lo, hi, lambda),
            Piece::Grid { nodes, values } => {
                let mut m = 0.0;
                for i in 1..nodes.len() {
                    let (x0, x1) = (nodes[i - 1], nodes[i]);
                    let (v0, v1) = (values[i - 1].abs(), values[i].abs());
                    // |linear| is piecewise linear; split at a sign change.
                    if values[i - 1] * values[i] < 0.0 {
                        let xm = x0 + (x1 - x0) * v0 / (v0 + v1);
                        m += linear_superlevel(x0, xm, v0, 0.0, lambda)
                            + linear_superlevel(xm, x1, 0.0, v1, lambda);
                    } else {
                        m += linear_superlevel(x0, x1, v0, v1, lambda);
                    }
                }
                m
            }
        }
    }

    /// `sup |f|` (infinite for pieces singular at the origin).
    pub fn sup(&self) -> f64 {
        match self {
            Piece::Box { .. } => 1.0,
            Piece::PowerExp { p, q, lo, hi } => {
                let g = |x: f64| if x == 0.0 { 0.0 } else { (p * x.ln() - q * x).exp() };
                if *p < 0.0 {
                    if *lo == 0.0 { f64::INFINITY } else { g(*lo) }
                } else if *p == 0.0 {
                    (-q * lo).exp()
                } else {
                    let mode = if *q > 0.0 { (p / q).clamp(*lo, *hi) } else { *hi };
                    g(mode)
                }
            }
            Piece::Grid { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Lorentz norm `‖f‖_{p,1} = ∫ f*(s) s^{1/p} ds/s = p ∫_0^∞ μ(λ)^{1/p} dλ`.
    pub fn lorentz_norm(&self, p: f64, cfg: &QuadConfig) -> Result<f64> {
        if let Piece::Box { lo, hi } = self {
            return Ok(p * (hi - lo).powf(1.0 / p));
        }
        let top = self.sup();
        let f = |lam: f64| self.distribution(lam).powf(1.0 / p);
        let value = if top.is_finite() {
            integrate_axis(f, &Axis::new(0.0, top).lo_exponent(0.0), cfg)?.value
        } else {
            let axis = Axis::new(0.0, f64::INFINITY).hints([1.0, 10.0, 100.0]);
            integrate_axis(f, &axis, cfg)
                .map_err(|e| Error::NormDivergence(format!("Lorentz tail: {e}")))?
                .value
        };
        Ok(p * value)
    }
}

fn linear_superlevel(x0: f64, x1: f64, v0: f64, v1: f64, lambda: f64) -> f64 {
    let len = x1 - x0;
    match (v0 > lambda, v1 > lambda) {
        (true, true) => len,
        (false, false) => 0.0,
        (true, false) => len * (v0 - lambda) / (v0 - v1),
        (false, true) => len * (v1 - lambda) / (v1 - v0),
    }
}

/// Measure of `{x ∈ (lo, hi) : x^p e^{-qx} > λ}`; the log of the profile is
/// concave, so the set is an interval found by bisection.
fn power_exp_superlevel(p: f64, q: f64, lo: f64, hi: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return hi - lo;
    }
    let ll = lambda.ln();
    let g = |x: f64| p * x.ln() - q * x;
    let mode = if p > 0.0 && q > 0.0 {
        (p / q).clamp(lo, hi)
    } else if p > 0.0 {
        hi
    } else if p < 0.0 || q > 0.0 {
        lo
    } else {
        return if lambda < 1.0 { hi - lo } else { 0.0 };
    };
    let peak = if mode == 0.0 {
        if p < 0.0 { f64::INFINITY } else { f64::NEG_INFINITY }
    } else {
        g(mode)
    };
    if !(peak > ll) {
        return 0.0;
    }
    let bisect = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if g(mid) > ll {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    };
    let right = if hi.is_finite() && g(hi) > ll {
        hi
    } else {
        let mut out = if hi.is_finite() { hi } else { mode.max(1.0) * 2.0 };
        while g(out) > ll {
            out *= 2.0;
        }
        bisect(mode, out)
    };
    let left = if lo == mode || (lo > 0.0 && g(lo) > ll) {
        lo
    } else if lo == 0.0 && mode > 0.0 && !(g(f64::MIN_POSITIVE) > ll) {
        bisect(mode, 0.0)
    } else if lo == 0.0 {
        0.0
    } else {
        bisect(mode, lo)
    };
    (right - left).max(0.0)
}

/// One product term `coef · Π_j piece_j(x_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub factors: Vec<Piece>,
}

/// Finite sum of product terms on `ℝ₊^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableFunction {
    dim: usize,
    terms: Vec<Term>,
}

impl SeparableFunction {
    pub fn new(dim: usize, terms: Vec<Term>) -> Result<Self> {
        if dim == 0 || terms.is_empty() {
            return domain("a separable function needs d >= 1 and at least one term");
        }
        for term in &terms {
            if term.factors.len() != dim {
                return domain(format!("term has {} factors, expected {dim}", term.factors.len()));
            }
            for piece in &term.factors {
                piece.validate()?;
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn single(coef: f64, factors: Vec<Piece>) -> Result<Self> {
        Self::new(factors.len(), vec![Term { coef, factors }])
    }

    /// Indicator of the box `Π (lo_j, hi_j)`.
    pub fn indicator_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let factors = lo.iter().zip(hi).map(|(&l, &h)| Piece::indicator(l, h)).collect::<Result<_>>()?;
        Self::single(1.0, factors)
    }

    /// The Laguerre function `𝓛_k^a` on the half line, as a signed sum of
    /// power-exponential terms.
    pub fn laguerre(k: usize, a: f64) -> Result<Self> {
        let idx = LaguerreIndex::new(k, a)?;
        let norm = idx.normalization();
        let terms = laguerre_coefficients(idx)
            .into_iter()
            .enumerate()
            .map(|(j, c)| Term {
                coef: norm * c,
                factors: vec![Piece::PowerExp { p: j as f64 + 0.5 * a, q: 0.5, lo: 0.0, hi: f64::INFINITY }],
            })
            .collect();
        Self::new(1, terms)
    }

    /// Tensor product of two functions.
    pub fn tensor(&self, other: &SeparableFunction) -> SeparableFunction {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for s in &self.terms {
            for o in &other.terms {
                let mut factors = s.factors.clone();
                factors.extend(o.factors.iter().cloned());
                terms.push(Term { coef: s.coef * o.coef, factors });
            }
        }
        SeparableFunction { dim: self.dim + other.dim, terms }
    }

    pub fn scaled(&self, c: f64) -> SeparableFunction {
        let terms = self.terms.iter().map(|t| Term { coef: c * t.coef, ..t.clone() }).collect();
        SeparableFunction { dim: self.dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.factors.iter().zip(x).map(|(p, &xi)| p.eval(xi)).product::<f64>())
            .sum()
    }

    pub fn is_signed(&self) -> bool {
        self.terms.iter().any(|t| t.coef < 0.0 || t.factors.iter().any(|p| !p.is_nonnegative()))
    }

    /// `|f|` as a separable function: exact for one term, rejected for signed
    /// sums since `|Σ| != Σ|·|`.
    pub fn abs(&self) -> Result<SeparableFunction> {
        if !self.is_signed() {
            return Ok(self.clone());
        }
        if self.terms.len() > 1 {
            return Err(Error::SignedInput);
        }
        let t = &self.terms[0];
        Ok(SeparableFunction {
            dim: self.dim,
            terms: vec![Term { coef: t.coef.abs(), factors: t.factors.iter().map(Piece::abs).collect() }],
        })
    }
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Piece::Box { lo, hi } => write!(f, "box({lo},{hi})"),
            Piece::PowerExp { p, q, lo, hi } => write!(f, "powexp({p},{q},{lo},{hi})"),
            Piece::Grid { nodes, values } => {
                write!(f, "grid(")?;
                for (i, (x, y)) in nodes.iter().zip(values).enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}:{y}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for SeparableFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", t.coef)?;
            for p in &t.factors {
                write!(f, "*{p}")?;
            }
        }
        Ok(())
    }
}

/// Parses the function-spec grammar used by the CLI:
///
/// ```text
/// spec   := term ('+' term)*
/// term   := [number '*'] factor ('*' factor)*
/// factor := box(lo,hi) | powexp(p,q[,lo,hi]) | grid(x:y,...) | laguerre(k,a)
/// ```
///
/// `laguerre(k,a)` is a signed sum of power-exponential profiles, so a term
/// containing it expands into several product terms.
impl FromStr for SeparableFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut dim = None;
        for raw in split_top_level(s, '+') {
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let mut partial = vec![Term { coef: 1.0, factors: Vec::new() }];
            for tok in split_top_level(raw, '*') {
                let tok = tok.trim();
                if let Ok(c) = tok.parse::<f64>() {
                    partial.iter_mut().for_each(|t| t.coef *= c);
                    continue;
                }
                let sum = parse_factor(tok)?;
                partial = partial
                    .iter()
                    .flat_map(|t| {
                        sum.iter().map(move |(c, piece)| {
                            let mut factors = t.factors.clone();
                            factors.push(piece.clone());
                            Term { coef: t.coef * c, factors }
                        })
                    })
                    .collect();
            }
            dim = Some(check_dim(dim, partial[0].factors.len())?);
            terms.extend(partial);
        }
        let dim = dim.ok_or_else(|| Error::Config("empty function spec".into()))?;
        SeparableFunction::new(dim, terms)
    }
}

/// One factor as a signed sum of pieces.
fn parse_factor(tok: &str) -> Result<Vec<(f64, Piece)>> {
    let (name, args) = tok
        .strip_suffix(')')
        .and_then(|t| t.split_once('('))
        .ok_or_else(|| Error::Config(format!("cannot parse factor `{tok}`")))?;
    let nums = || -> Result<Vec<f64>> { args.split(',').map(|a| parse_num(a.trim())).collect() };
    let one = |p: Piece| Ok(vec![(1.0, p)]);
    match name.trim() {
        "box" => match nums()?.as_slice() {
            [lo, hi] => one(Piece::indicator(*lo, *hi)?),
            _ => Err(Error::Config("box takes (lo,hi)".into())),
        },
        "powexp" => match nums()?.as_slice() {
            [p, q] => one(Piece::power_exp(*p, *q, 0.0, f64::INFINITY)?),
            [p, q, lo, hi] => one(Piece::power_exp(*p, *q, *lo, *hi)?),
            _ => Err(Error::Config("powexp takes (p,q) or (p,q,lo,hi)".into())),
        },
        "grid" => {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for pair in args.split(',') {
                let (x, y) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("grid entry `{pair}` is not x:y")))?;
                xs.push(parse_num(x.trim())?);
                ys.push(parse_num(y.trim())?);
            }
            one(Piece::grid(xs, ys)?)
        }
        "laguerre" => match nums()?.as_slice() {
            [k, a] if *k >= 0.0 && k.fract() == 0.0 => Ok(SeparableFunction::laguerre(*k as usize, *a)?
                .terms
                .into_iter()
                .map(|t| (t.coef, t.factors.into_iter().next().expect("one factor")))
                .collect()),
            _ => Err(Error::Config("laguerre takes (k,a) with integer k".into())),
        },
        other => Err(Error::Config(format!("unknown factor `{other}`"))),
    }
}

fn check_dim(prev: Option<usize>, d: usize) -> Result<usize> {
    match prev {
        Some(p) if p != d => Err(Error::Config(format!("terms have mixed dimensions {p} and {d}"))),
        _ => Ok(d),
    }
}

fn parse_num(s: &str) -> Result<f64> {
    match s {
        "inf" | "+inf" => Ok(f64::INFINITY),
        _ => s.parse().map_err(|_| Error::Config(format!("not a number: `{s}`"))),
    }
}

fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let bytes: Vec<char> = s.chars().collect();
    let mut offset = 0;
    for (i, &c) in bytes.iter().enumerate() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            // A '+' right after 'e' is an exponent sign, not a separator.
            c if c == sep && depth == 0 && !(sep == '+' && i > 0 && matches!(bytes[i - 1], 'e' | 'E')) => {
                out.push(&s[start..offset]);
                start = offset + c.len_utf8();
            }
            _ => {}
        }
        offset += c.len_utf8();
    }
    out.push(&s[start..]);
    out
}

/// `∫_0^∞ H_t^a(ξ, η) g(η) dη` for one 1-D piece.
pub fn kernel_piece_integral(kp: &KernelParams1D, piece: &Piece, xi: f64, cfg: &QuadConfig) -> Result<f64> {
    let mut axis = piece.axis().hints(kp.eta_hints(xi)).tail_scale(kp.tail_scale());
    if piece.support().0 == 0.0 {
        axis = axis.lo_exponent(0.5 * kp.a() + piece.lo_exponent());
    }
    let r = integrate_axis(
        |eta| {
            let g = piece.eval(eta);
            if g == 0.0 || eta <= 0.0 {
                0.0
            } else {
                g * kp.h(xi, eta)
            }
        },
        &axis,
        cfg,
    )?;
    Ok(r.value)
}

fn check_point(alpha: &TypeMultiIndex, f: &SeparableFunction, x: &[f64]) -> Result<()> {
    if f.dim() != alpha.dim() || x.len() != alpha.dim() {
        return domain(format!(
            "dimension mismatch: alpha has {}, f has {}, x has {}",
            alpha.dim(),
            f.dim(),
            x.len()
        ));
    }
    if x.iter().any(|&v| !(v > 0.0)) {
        return domain("evaluation points must lie in the open positive orthant");
    }
    Ok(())
}

/// Signed linear kernel integral `Σ_terms coef Π_j ∫ H_t^{α_j}(x_j, η) g_j(η) dη`.
fn kernel_linear(alpha: &TypeMultiIndex, t: f64, f: &SeparableFunction, x: &[f64], cfg: &QuadConfig) -> Result<f64> {
    let params: Vec<KernelParams1D> =
        alpha.components().iter().map(|&a| KernelParams1D::new(a, t)).collect::<Result<_>>()?;
    let mut total = 0.0;
    for term in f.terms() {
        let mut prod = term.coef;
        for (j, piece) in term.factors.iter().enumerate() {
            prod *= kernel_piece_integral(&params[j], piece, x[j], cfg)?;
            if prod == 0.0 {
                break;
            }
        }
        total += prod;
    }
    Ok(total)
}

/// `∫ H_t^α(x, y) |f(y)| dy`.
pub fn apply_kernel(
    alpha: &TypeMultiIndex,
    t: f64,
    f: &SeparableFunction,
    x: &[f64],
    cfg: &QuadConfig,
) -> Result<f64> {
    check_point(alpha, f, x)?;
    kernel_linear(alpha, t, &f.abs()?, x, cfg)
}

/// `T_t^α f(x) = e^{-t(|α|+d)/2} ∫ H_{t/2}^α(x, y) f(y) dy`; linear, so
/// signed inputs are allowed.
pub fn apply_semigroup(
    alpha: &TypeMultiIndex,
    t: f64,
    f: &SeparableFunction,
    x: &[f64],
    cfg: &QuadConfig,
) -> Result<f64> {
    check_point(alpha, f, x)?;
    let pref = (-0.5 * t * (alpha.abs_sum() + alpha.dim() as f64)).exp();
    Ok(pref * kernel_linear(alpha, 0.5 * t, f, x, cfg)?)
}

/// Log-spaced discretization of `sup_{t>0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_decade: usize,
    /// Golden-section passes around the discrete argmax.
    pub refinement: usize,
    /// Final bracket width in `ln t` of each pass.
    pub refine_tol: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { t_min: 1e-4, t_max: 1e2, points_per_decade: 32, refinement: 3, refine_tol: 1e-3 }
    }
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min) {
            return Err(Error::Config(format!("time grid needs 0 < t_min < t_max, got {} {}", self.t_min, self.t_max)));
        }
        if self.points_per_decade < 16 {
            return Err(Error::Config("time grid needs at least 16 points per decade".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let (l0, l1) = (self.t_min.log10(), self.t_max.log10());
        let n = ((l1 - l0) * self.points_per_decade as f64).round() as usize;
        (0..=n).map(|k| 10f64.powf(l0 + (l1 - l0) * k as f64 / n as f64)).collect()
    }

    /// Spacing of the grid in `ln t`.
    pub fn log_step(&self) -> f64 {
        std::f64::consts::LN_10 / self.points_per_decade as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalValue {
    pub value: f64,
    pub argmax_t: f64,
    /// The supremum sits at an end of the time grid.
    pub at_grid_boundary: bool,
}

/// Maximize `g` over a time grid with golden-section refinement in `ln t`.
pub fn maximize_over_time<G: Fn(f64) -> Result<f64>>(g: G, grid: &TimeGrid) -> Result<MaximalValue> {
    grid.validate()?;
    let pts = grid.points();
    let mut best = (f64::NEG_INFINITY, pts[0]);
    let mut best_k = 0;
    for (k, &t) in pts.iter().enumerate() {
        let v = g(t)?;
        if v > best.0 {
            best = (v, t);
            best_k = k;
        }
    }
    let at_grid_boundary = best_k == 0 || best_k == pts.len() - 1;
    let (lmin, lmax) = (grid.t_min.ln(), grid.t_max.ln());
    let mut center = best.1.ln();
    let mut half = grid.log_step();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..grid.refinement {
        let (mut lo, mut hi) = ((center - half).max(lmin), (center + half).min(lmax));
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let mut f1 = g(x1.exp())?;
        let mut f2 = g(x2.exp())?;
        while hi - lo > grid.refine_tol * half {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = g(x1.exp())?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = g(x2.exp())?;
            }
        }
        for (v, l) in [(f1, x1), (f2, x2)] {
            if v > best.0 {
                best = (v, l.exp());
            }
        }
        center = best.1.ln();
        half *= 0.5;
    }
    Ok(MaximalValue { value: best.0, argmax_t: best.1, at_grid_boundary })
}

/// `H_* f(x) = sup_t ∫ H_t^α(x, y) |f(y)| dy` over the time grid.
pub fn maximal(
    alpha: &TypeMultiIndex,
    f: &SeparableFunction,
    x: &[f64],
    grid: &TimeGrid,
    cfg: &QuadConfig,
) -> Result<MaximalValue> {
    check_point(alpha, f, x)?;
    let abs = f.abs()?;
    maximize_over_time(|t| kernel_linear(alpha, t, &abs, x, cfg), grid)
}

/// `sup_t T_t^α |f|(x)` over the same grid, for comparison with [`maximal`].
pub fn semigroup_maximal(
    alpha: &TypeMultiIndex,
    f: &SeparableFunction,
    x: &[f64],
    grid: &TimeGrid,
    cfg: &QuadConfig,
) -> Result<MaximalValue> {
    check_point(alpha, f, x)?;
    let abs = f.abs()?;
    maximize_over_time(|t| apply_semigroup(alpha, t, &abs, x, cfg), grid)
}

/// Maximal function of a nonnegative single-term `f` at every point of the
/// tensor grid `axes[0] × … × axes[d-1]`, using the discrete time grid only.
///
/// The 1-D integrals are tabulated once per axis node and time, so the cost
/// is `Σ_j |axes[j]| · |times|` quadratures plus one product per cell.
/// Returned in row-major order (last axis fastest), as `(value, argmax_t)`.
pub fn maximal_on_tensor_grid(
    alpha: &TypeMultiIndex,
    f: &SeparableFunction,
    axes: &[Vec<f64>],
    grid: &TimeGrid,
    cfg: &QuadConfig,
) -> Result<Vec<(f64, f64)>> {
    grid.validate()?;
    if f.terms().len() != 1 || f.is_signed() {
        return domain("tensor-grid maximal needs a single nonnegative term");
    }
    if axes.len() != alpha.dim() || f.dim() != alpha.dim() {
        return domain("tensor-grid dimension mismatch");
    }
    let term = &f.terms()[0];
    let times = grid.points();
    // tables[j][i][k] = ∫ H_{t_k}^{α_j}(axes[j][i], η) g_j(η) dη
    let mut tables = Vec::with_capacity(axes.len());
    for (j, nodes) in axes.iter().enumerate() {
        let a = alpha.components()[j];
        let piece = &term.factors[j];
        let rows: Vec<Result<Vec<f64>>> = nodes
            .par_iter()
            .map(|&x| {
                times
                    .iter()
                    .map(|&t| kernel_piece_integral(&KernelParams1D::new(a, t)?, piece, x, cfg))
                    .collect()
            })
            .collect();
        tables.push(rows.into_iter().collect::<Result<Vec<_>>>()?);
    }
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();
    let out = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut idx = vec![0; shape.len()];
            let mut r = flat;
            for j in (0..shape.len()).rev() {
                idx[j] = r % shape[j];
                r /= shape[j];
            }
            let mut best = (f64::NEG_INFINITY, times[0]);
            for (k, &t) in times.iter().enumerate() {
                let v = term.coef * (0..shape.len()).map(|j| tables[j][idx[j]][k]).product::<f64>();
                if v > best.0 {
                    best = (v, t);
                }
            }
            best
        })
        .collect();
    Ok(out)
}

/// Centered maximal function `sup_r (2r)^{-1} ∫_{x-r}^{x+r} |f|` on the half
/// line, with `f` extended by zero to the negative axis.
pub fn hl_maximal_1d(f: &Piece, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return domain("centered maximal function is evaluated at x > 0");
    }
    let (lo, hi) = f.support();
    if let Piece::Box { .. } = f {
        if x > lo && x < hi {
            return Ok(1.0);
        }
        // The average is monotone between the radii where an interval end
        // crosses a support end, so those radii are the only candidates.
        let avg = |r: f64| ((x + r).min(hi) - (x - r).max(lo)).max(0.0) / (2.0 * r);
        return Ok([(x - lo).abs(), (x - hi).abs()].into_iter().filter(|&r| r > 0.0).map(avg).fold(0.0, f64::max));
    }
    let cfg = QuadConfig::with_rel_tol(1e-8);
    let average = |r: f64| -> Result<f64> {
        let a = (x - r).max(lo);
        let b = (x + r).min(hi);
        if !(b > a) {
            return Ok(0.0);
        }
        let mut axis = Axis::new(a, b).hints(f.breakpoints());
        if a == 0.0 {
            axis = axis.lo_exponent(f.lo_exponent());
        }
        Ok(integrate_axis(|y| f.eval(y).abs(), &axis, &cfg)?.value / (2.0 * r))
    };
    let scale = x.max(if hi.is_finite() { hi } else { lo.max(1.0) });
    let mut best = f.eval(x).abs();
    let mut best_r = 0.0;
    let per_decade = 16;
    let (l0, l1) = ((x * 1e-6).log10(), (scale * 1e4).log10());
    let n = ((l1 - l0) * per_decade as f64).ceil() as usize;
    for k in 0..=n {
        let r = 10f64.powf(l0 + (l1 - l0) * k as f64 / n as f64);
        let v = average(r)?;
        if v > best {
            best = v;
            best_r = r;
        }
    }
    if best_r > 0.0 {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let step = (l1 - l0) / n as f64 * std::f64::consts::LN_10;
        let (mut lo_r, mut hi_r) = (best_r.ln() - step, best_r.ln() + step);
        let mut x1 = hi_r - inv_phi * (hi_r - lo_r);
        let mut x2 = lo_r + inv_phi * (hi_r - lo_r);
        let (mut f1, mut f2) = (average(x1.exp())?, average(x2.exp())?);
        for _ in 0..40 {
            if f1 >= f2 {
                hi_r = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi_r - inv_phi * (hi_r - lo_r);
                f1 = average(x1.exp())?;
            } else {
                lo_r = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo_r + inv_phi * (hi_r - lo_r);
                f2 = average(x2.exp())?;
            }
        }
        best = best.max(f1).max(f2);
    }
    Ok(best)
}

/// Decay constants of the two exponential factors in the pointwise bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropositionConstants {
    /// Constant in `e^{-c t ξ}` multiplying `M_1 f(ξ)`.
    pub c_local: f64,
    /// Constant in `e^{-c ξ / t}` multiplying the global norm term.
    pub c_global: f64,
}

/// Which global norm enters the second term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropositionVariant {
    /// `ξ^{-1/p1} ‖f‖_{p1}`
    Lp,
    /// `ξ^{-1/p0} ‖f‖_{p0,1}`
    Lorentz,
}

/// Precomputed norms for repeated right-hand-side evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct PropositionInput {
    pub a: f64,
    pub piece: Piece,
    pub lp_norm: f64,
    pub lorentz_norm: f64,
}

impl PropositionInput {
    pub fn new(a: f64, piece: Piece, cfg: &QuadConfig) -> Result<Self> {
        if !(a > -1.0 && a < 0.0) {
            return domain(format!("the pointwise bound is stated for a in (-1, 0), got {a}"));
        }
        let p1 = -2.0 / a;
        let p0 = 2.0 / (2.0 + a);
        let lp_norm = piece.lp_norm(p1, cfg)?;
        let lorentz_norm = piece.lorentz_norm(p0, cfg)?;
        Ok(Self { a, piece, lp_norm, lorentz_norm })
    }
}

/// `e^{-c t ξ} M_1 f(ξ) + e^{-c ξ/t} ξ^{-1/p} ‖f‖` with `t` replaced by
/// `min(t, 1)`; `m1` is `M_1 f(ξ)`, passed in so it can be cached across `t`.
pub fn proposition_rhs(
    input: &PropositionInput,
    t: f64,
    xi: f64,
    m1: f64,
    c: &PropositionConstants,
    variant: PropositionVariant,
) -> f64 {
    let t = t.min(1.0);
    let a = input.a;
    let (p, norm) = match variant {
        PropositionVariant::Lp => (-2.0 / a, input.lp_norm),
        PropositionVariant::Lorentz => (2.0 / (2.0 + a), input.lorentz_norm),
    };
    (-c.c_local * t * xi).exp() * m1 + (-c.c_global * xi / t).exp() * xi.powf(-1.0 / p) * norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::laguerre_fn;

    fn cfg() -> QuadConfig {
        QuadConfig::with_rel_tol(1e-9)
    }

    #[test]
    fn parse_and_display_round_trip() {
        let f: SeparableFunction = "2*box(0.5,1)*powexp(-0.2,0,0,1) + box(0,1)*grid(0:1,1:2,2:0)".parse().unwrap();
        assert_eq!(f.dim(), 2);
        assert_eq!(f.terms().len(), 2);
        let g: SeparableFunction = f.to_string().parse().unwrap();
        assert_eq!(f, g);
        let lag: SeparableFunction = "laguerre(3,-0.5)".parse().unwrap();
        assert_eq!(lag.terms().len(), 4);
        assert!("box(1,0)".parse::<SeparableFunction>().is_err());
        assert!("box(0,1) + box(0,1)*box(0,1)".parse::<SeparableFunction>().is_err());
        let e: SeparableFunction = "1e+0*box(0,1)".parse().unwrap();
        assert_eq!(e.terms()[0].coef, 1.0);
    }

    #[test]
    fn laguerre_function_representation() {
        let f = SeparableFunction::laguerre(4, -0.5).unwrap();
        let idx = LaguerreIndex::new(4, -0.5).unwrap();
        for x in [0.01, 0.7, 3.0, 12.0] {
            assert!((f.eval(&[x]) - laguerre_fn(idx, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_state_is_invariant() {
        let alpha = TypeMultiIndex::new(vec![-0.5]).unwrap();
        let f = SeparableFunction::laguerre(0, -0.5).unwrap();
        let idx = LaguerreIndex::new(0, -0.5).unwrap();
        for t in [0.1, 1.0] {
            for x in [0.05, 1.0, 4.0] {
                let v = apply_kernel(&alpha, t, &f, &[x], &cfg()).unwrap();
                assert!((v / laguerre_fn(idx, x) - 1.0).abs() < 1e-5, "t={t} x={x}");
            }
        }
    }

    #[test]
    fn signed_sums_rejected_by_kernel_but_not_semigroup() {
        let alpha = TypeMultiIndex::new(vec![0.0]).unwrap();
        let f = SeparableFunction::laguerre(1, 0.0).unwrap();
        assert!(matches!(apply_kernel(&alpha, 0.5, &f, &[1.0], &cfg()), Err(Error::SignedInput)));
        assert!(apply_semigroup(&alpha, 0.5, &f, &[1.0], &cfg()).is_ok());
    }

    #[test]
    fn tensor_product_factorizes() {
        let alpha = TypeMultiIndex::new(vec![-0.5, 0.3]).unwrap();
        let f1 = SeparableFunction::indicator_box(&[0.5], &[1.0]).unwrap();
        let f2: SeparableFunction = "powexp(0.5,1)".parse().unwrap();
        let f = f1.tensor(&f2);
        let a1 = TypeMultiIndex::new(vec![-0.5]).unwrap();
        let a2 = TypeMultiIndex::new(vec![0.3]).unwrap();
        let x = [0.2, 2.0];
        let joint = apply_kernel(&alpha, 0.4, &f, &x, &cfg()).unwrap();
        let prod = apply_kernel(&a1, 0.4, &f1, &x[..1], &cfg()).unwrap()
            * apply_kernel(&a2, 0.4, &f2, &x[1..], &cfg()).unwrap();
        assert!((joint / prod - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hl_maximal_box_examples() {
        let f = Piece::indicator(0.0, 1.0).unwrap();
        assert_eq!(hl_maximal_1d(&f, 0.5).unwrap(), 1.0);
        assert!((hl_maximal_1d(&f, 2.0).unwrap() - 0.25).abs() < 1e-15);
        let g = Piece::grid(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!((hl_maximal_1d(&g, 2.0).unwrap() - 0.25).abs() < 1e-6);
    }

    #[test]
    fn hl_maximal_dominates_pointwise() {
        let f = Piece::power_exp(-0.2, 0.0, 0.0, 1.0).unwrap();
        for x in [0.01, 0.3, 0.9] {
            assert!(hl_maximal_1d(&f, x).unwrap() >= f.eval(x) * (1.0 - 1e-9));
        }
    }

    #[test]
    fn piece_norms() {
        let f = Piece::power_exp(-0.2, 0.0, 0.0, 1.0).unwrap();
        // ∫_0^1 x^{-0.8} = 5
        assert!((f.lp_norm(4.0, &cfg()).unwrap() - 5f64.powf(0.25)).abs() < 1e-8);
        // f* = s^{-1/5} on (0,1): ∫ s^{-1/5} s^{3/4} ds/s = 1/(3/4 - 1/5)
        let want = 1.0 / (0.75 - 0.2);
        assert!((f.lorentz_norm(4.0 / 3.0, &cfg()).unwrap() / want - 1.0).abs() < 1e-6);
        let b = Piece::indicator(0.0, 1.0).unwrap();
        assert_eq!(b.lorentz_norm(4.0 / 3.0, &cfg()).unwrap(), 4.0 / 3.0);
        let bad = Piece::power_exp(-0.5, 0.0, 0.0, 1.0).unwrap();
        assert!(matches!(bad.lp_norm(2.0, &cfg()), Err(Error::NormDivergence(_))));
    }

    #[test]
    fn superlevel_of_unimodal_profile() {
        // x e^{-x}: {> λ} for λ = 0.2 is (0.2592, 2.5426)
        let m = power_exp_superlevel(1.0, 1.0, 0.0, f64::INFINITY, 0.2);
        assert!((m - (2.542641357773527 - 0.25917110181907377)).abs() < 1e-9);
        assert_eq!(power_exp_superlevel(1.0, 1.0, 0.0, f64::INFINITY, 0.5), 0.0);
    }

    #[test]
    fn time_grid_points() {
        let g = TimeGrid::default();
        let p = g.points();
        assert_eq!(p.len(), 6 * 32 + 1);
        assert!((p[0] - 1e-4).abs() < 1e-18 && (p[p.len() - 1] - 1e2).abs() < 1e-12);
        assert!(TimeGrid { points_per_decade: 8, ..g }.validate().is_err());
    }
}
