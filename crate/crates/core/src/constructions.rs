//! Extremal functions and counterexample families.
//!
//! Level sets of the analytic lower-bound fields are measured exactly via the
//! product level-set formula; the families themselves are realized as
//! disjoint box unions so the kernel can be applied one box at a time.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{KernelParams1D, TypeMultiIndex};
use crate::measure::{
    log_grid, product_levelset_exact, radial_levelset, gaussian_tail_levelset, AxisBox, BoxUnion, CurveMethod,
    CurveSample, DistributionCurve, Rearrangement,
};
use crate::operator::{kernel_piece_integral, Piece, SeparableFunction, Term, TimeGrid};
use crate::pencil::{exponents, Exponents, PencilExponents};
use crate::quad::{integrate, QuadConfig};
use crate::specfun::ln_gamma;

fn conjugate(p1: f64) -> Result<f64> {
    if !(p1 > 2.0 && p1.is_finite()) {
        return domain(format!("p1 must be a finite exponent above 2, got {p1}"));
    }
    Ok(p1 / (p1 - 1.0))
}

// ---------------------------------------------------------------------------
// ψ_d and F_σ

/// `ψ_d(x) = (Σ x_j)^{(2/p1 - 1) d} Π x_j^{-1/p1}`.
pub fn psi_d(d: usize, p1: f64, x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), d);
    let s: f64 = x.iter().sum();
    let lp: f64 = x.iter().map(|v| v.ln()).sum();
    ((2.0 / p1 - 1.0) * d as f64 * s.ln() - lp / p1).exp()
}

/// `|{ψ_d > λ}|` by radial quadrature. `ψ_d` is homogeneous of degree
/// `-d/p0`, so along the ray through `θ` the level set ends at
/// `(ψ_d(θ)/λ)^{p0/d}`.
pub fn psi_levelset(d: usize, p1: f64, lambda: f64, cfg: &QuadConfig) -> Result<f64> {
    let p0 = conjugate(p1)?;
    if !(lambda > 0.0) {
        return domain("level must be positive");
    }
    radial_levelset(d, |theta| (psi_d(d, p1, theta) / lambda).powf(p0 / d as f64), cfg)
}

/// Closed form of [`psi_levelset`]: a Dirichlet integral,
/// `λ^{-p0} Γ(b)^d / (d Γ(d b))` with `b = 1 - p0/p1`.
pub fn psi_levelset_exact(d: usize, p1: f64, lambda: f64) -> f64 {
    let p0 = p1 / (p1 - 1.0);
    let b = 1.0 - p0 / p1;
    let df = d as f64;
    (-p0 * lambda.ln() + df * ln_gamma(b) - ln_gamma(df * b)).exp() / df
}

/// `F_σ(x) = Π x_j^{-1/p1} exp(-(σ Σ x_j)^γ)`.
pub fn f_sigma(d: usize, p1: f64, gamma: f64, sigma: f64, x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), d);
    let s: f64 = x.iter().sum();
    let lp: f64 = x.iter().map(|v| v.ln()).sum();
    (-lp / p1 - (sigma * s).powf(gamma)).exp()
}

/// `|{F_σ > λ}|`. Raising to the power `p1` turns this into the level set of
/// `Π x_j^{-1} exp(-(σ' Σ x_j)^γ)` at `λ^{p1}` with `σ' = p1^{1/γ} σ`.
pub fn f_sigma_levelset(d: usize, p1: f64, gamma: f64, sigma: f64, lambda: f64, cfg: &QuadConfig) -> Result<f64> {
    conjugate(p1)?;
    if !(gamma > 0.0 && sigma > 0.0 && lambda > 0.0) {
        return domain("F_sigma needs positive gamma, sigma and level");
    }
    Ok(gaussian_tail_levelset(d, gamma, sigma * p1.powf(1.0 / gamma), lambda.powf(p1), cfg)?.measure)
}

/// Distribution curve of `F_σ` on the given levels, in parallel.
pub fn f_sigma_curve(
    d: usize,
    p1: f64,
    gamma: f64,
    sigma: f64,
    lambdas: &[f64],
    cfg: &QuadConfig,
) -> Result<DistributionCurve> {
    let samples = lambdas
        .par_iter()
        .map(|&l| Ok(CurveSample { lambda: l, measure: f_sigma_levelset(d, p1, gamma, sigma, l, cfg)?, stderr: 0.0 }))
        .collect::<Result<Vec<_>>>()?;
    DistributionCurve::new(samples, CurveMethod::Radial)
}

/// `s^{-1/p1} [log(2 + 1/(σ^d s))]^{(d-1)/p1}`, the profile bounding `F_σ*`.
pub fn f_sigma_rearrangement_profile(d: usize, p1: f64, sigma: f64, s: f64) -> f64 {
    let arg = 2.0 + 1.0 / (sigma.powi(d as i32) * s);
    s.powf(-1.0 / p1) * arg.ln().powf((d as f64 - 1.0) / p1)
}

// ---------------------------------------------------------------------------
// sharpness cube

/// `χ_{(1/2,1)^d}` with the lower-bound field `Π_{minimal j} x_j^{-1/p1}` on
/// `(0,1)^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessCube {
    pub alpha: TypeMultiIndex,
    pub exponents: PencilExponents,
    pub minimal: Vec<usize>,
    pub f: SeparableFunction,
}

pub fn sharpness_cube(alpha: &TypeMultiIndex, min_tol: f64) -> Result<SharpnessCube> {
    let Exponents::Pencil(ex) = exponents(alpha, min_tol) else {
        return Err(Error::Admissibility("the sharpness cube needs a negative minimal type".into()));
    };
    let d = alpha.dim();
    let f = SeparableFunction::indicator_box(&vec![0.5; d], &vec![1.0; d])?;
    Ok(SharpnessCube { alpha: alpha.clone(), exponents: ex, minimal: alpha.minimal_indices(min_tol), f })
}

impl SharpnessCube {
    pub fn lower_field(&self, x: &[f64]) -> f64 {
        if x.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return 0.0;
        }
        self.minimal.iter().map(|&j| x[j].powf(-1.0 / self.exponents.p1)).product()
    }

    /// Maximal function of the cube on the tensor grid `nodes^d`.
    pub fn maximal_table(&self, nodes: &[f64], grid: &TimeGrid, cfg: &QuadConfig) -> Result<TensorTable> {
        let axes = vec![nodes.to_vec(); self.alpha.dim()];
        let values = crate::operator::maximal_on_tensor_grid(&self.alpha, &self.f, &axes, grid, cfg)?
            .into_iter()
            .map(|(v, _)| v)
            .collect();
        TensorTable::new(axes, values)
    }
}

/// Values on a tensor grid of positive nodes, row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorTable {
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

/// Cell edges around log-spaced nodes: geometric midpoints, `0` below the
/// first node, and the last node's mirror image above it.
fn cell_edges(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut e = Vec::with_capacity(n + 1);
    e.push(0.0);
    for w in nodes.windows(2) {
        e.push((w[0] * w[1]).sqrt());
    }
    e.push(if n >= 2 { nodes[n - 1] * (nodes[n - 1] / nodes[n - 2]).sqrt() } else { nodes[0] });
    e
}

impl TensorTable {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.len() < 2) {
            return domain("tensor table needs at least two nodes per axis");
        }
        if axes.iter().any(|a| !(a[0] > 0.0) || a.windows(2).any(|w| !(w[1] > w[0]))) {
            return domain("tensor table nodes must be positive and increasing");
        }
        if values.len() != axes.iter().map(Vec::len).product::<usize>() {
            return domain("tensor table value count does not match the grid");
        }
        Ok(Self { axes, values })
    }

    /// `|{v > λ}|`: cell volumes on the leading axes, and along the last
    /// axis the crossing interpolated linearly in `(ln x, ln v)`. Below the
    /// first node the first value is held.
    pub fn levelset(&self, lambda: f64) -> f64 {
        let d = self.axes.len();
        let last = &self.axes[d - 1];
        let n = last.len();
        let lead_edges: Vec<Vec<f64>> = self.axes[..d - 1].iter().map(|a| cell_edges(a)).collect();
        let lead_shape: Vec<usize> = self.axes[..d - 1].iter().map(Vec::len).collect();
        let lead_total: usize = lead_shape.iter().product();
        let ll = lambda.ln();
        (0..lead_total)
            .map(|flat| {
                let mut r = flat;
                let mut vol = 1.0;
                for j in (0..d - 1).rev() {
                    let i = r % lead_shape[j];
                    r /= lead_shape[j];
                    vol *= lead_edges[j][i + 1] - lead_edges[j][i];
                }
                let col = &self.values[flat * n..(flat + 1) * n];
                let mut len = if col[0] > lambda { last[0] } else { 0.0 };
                for i in 0..n - 1 {
                    let (a, b) = (col[i], col[i + 1]);
                    match (a > lambda, b > lambda) {
                        (true, true) => len += last[i + 1] - last[i],
                        (false, false) => {}
                        (up_a, _) => {
                            let (la, lb) = (a.max(f64::MIN_POSITIVE).ln(), b.max(f64::MIN_POSITIVE).ln());
                            let (xa, xb) = (last[i].ln(), last[i + 1].ln());
                            let xc = (xa + (ll - la) / (lb - la) * (xb - xa)).exp();
                            len += if up_a { xc - last[i] } else { last[i + 1] - xc };
                        }
                    }
                }
                vol * len
            })
            .sum()
    }
}

// ---------------------------------------------------------------------------
// splits and families

/// Splitting `ℝ^d_+ = ℝ^{d'}_+ × ℝ^{d''}_+` by a set `D'` of primed
/// coordinates (0-based).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    d: usize,
    primed: Vec<usize>,
}

impl SplitSpec {
    pub fn new(d: usize, mut primed: Vec<usize>) -> Result<Self> {
        primed.sort_unstable();
        primed.dedup();
        if primed.iter().any(|&j| j >= d) {
            return domain(format!("primed coordinates must be below d = {d}"));
        }
        Ok(Self { d, primed })
    }

    /// `D' = {0, …, d'-1}`.
    pub fn leading(d: usize, d_prime: usize) -> Result<Self> {
        if d_prime > d {
            return domain("d' cannot exceed d");
        }
        Self::new(d, (0..d_prime).collect())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn d_prime(&self) -> usize {
        self.primed.len()
    }

    pub fn d_double_prime(&self) -> usize {
        self.d - self.primed.len()
    }

    pub fn primed(&self) -> &[usize] {
        &self.primed
    }

    pub fn double_primed(&self) -> Vec<usize> {
        (0..self.d).filter(|j| !self.primed.contains(j)).collect()
    }

    /// `2 <= d' <= d''`, the configurations the counterexamples use.
    pub fn is_admissible(&self) -> bool {
        self.d_prime() >= 2 && self.d_prime() <= self.d_double_prime()
    }

    /// Primed coordinates must carry minimal type components.
    pub fn check_against(&self, alpha: &TypeMultiIndex, min_tol: f64) -> Result<()> {
        if alpha.dim() != self.d {
            return domain("split and type dimensions differ");
        }
        let minimal = alpha.minimal_indices(min_tol);
        match self.primed.iter().find(|j| !minimal.contains(j)) {
            Some(j) => Err(Error::Admissibility(format!("primed coordinate {j} is not minimal"))),
            None => Ok(()),
        }
    }

    fn place(&self, primed: &[f64], double: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        let dp = self.double_primed();
        for (k, &j) in self.primed.iter().enumerate() {
            x[j] = primed[k];
        }
        for (k, &j) in dp.iter().enumerate() {
            x[j] = double[k];
        }
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    FtBox,
    ErSlab,
    EtBeta,
    FnUnion,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub t: Option<f64>,
    pub r: Option<f64>,
    pub n: Option<usize>,
    pub beta: Option<f64>,
    /// Slices for `E_R`, dyadic depth for `E_t(β)` and `F_N`.
    pub resolution: Option<usize>,
}

/// A measured normalization against its target, with the accepted band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationCheck {
    pub quantity: String,
    pub measured: f64,
    pub target: f64,
    pub ratio: f64,
    pub band: [f64; 2],
    /// Exact value where one is available (the box union approximates it).
    pub exact: Option<f64>,
}

impl NormalizationCheck {
    fn new(quantity: &str, measured: f64, target: f64, exact: Option<f64>) -> Self {
        Self { quantity: quantity.into(), measured, target, ratio: measured / target, band: [0.5, 2.0], exact }
    }

    pub fn passes(&self) -> bool {
        self.ratio >= self.band[0] && self.ratio <= self.band[1]
    }

    fn enforce(self) -> Result<Self> {
        if self.passes() {
            Ok(self)
        } else {
            Err(Error::Normalization(format!(
                "{}: measured {:e} vs target {:e} (ratio {:.4}, band [{}, {}])",
                self.quantity, self.measured, self.target, self.ratio, self.band[0], self.band[1]
            )))
        }
    }
}

/// Analytic lower bound for the maximal function of a family member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LowerField {
    /// `coef · Π' x_j^{-1/p1}` on `(0, t)^{d'} × window''`.
    PrimedProduct { coef: f64, t: f64, double_lo: Vec<f64>, double_hi: Vec<f64> },
    /// `(log R)^{-1/p1} x_d^{-d'/p1} Π' x_j^{-1/p1}` on
    /// `4 < x_d < R-1`, `x_j < 1/x_d` (primed), `x_d/2 < x_j < 2 x_d` (rest).
    Slab { r: f64 },
    /// Constant on each of a list of disjoint windows.
    Constant { windows: Vec<(AxisBox, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleFamily {
    pub kind: FamilyKind,
    pub split: SplitSpec,
    pub p1: f64,
    pub params: FamilyParams,
    /// The family member is `height · χ_set`.
    pub set: BoxUnion,
    pub height: f64,
    /// Measures of the pieces of a disjoint union (`E_j` for `F_N`).
    pub component_measures: Vec<f64>,
    pub normalization: NormalizationCheck,
    pub field: LowerField,
}

fn require_admissible(split: &SplitSpec, strict: bool) -> Result<()> {
    let (dp, dpp) = (split.d_prime(), split.d_double_prime());
    let ok = dp >= 2 && if strict { dp < dpp } else { dp <= dpp };
    if ok {
        Ok(())
    } else {
        Err(Error::Admissibility(format!(
            "the construction needs 2 <= d' {} d'', got d' = {dp}, d'' = {dpp}",
            if strict { "<" } else { "<=" }
        )))
    }
}

/// Lorentz `L^{p,1}` norm of `height · χ_E` through the numeric
/// rearrangement pipeline (exactly `p · height · |E|^{1/p}`).
fn indicator_lorentz_norm(measure: f64, height: f64, p: f64) -> Result<f64> {
    let mut lambdas = log_grid(height * 1e-3, height * 1e3, 8);
    lambdas.push(height);
    let samples = lambdas
        .iter()
        .map(|&l| CurveSample { lambda: l, measure: if l < height { measure } else { 0.0 }, stderr: 0.0 })
        .collect();
    let curve = DistributionCurve::new(samples, CurveMethod::ExactBox)?;
    let grid = log_grid(measure * 1e-8, measure * 1e2, 64);
    let r = Rearrangement::from_curve(&curve, &grid)?;
    Ok(crate::measure::lorentz_p1_norm(p, &r)?.value)
}

/// `f_t = t^{(d''-d')/p1} χ_{E_t}`, `E_t = (t,2t)^{d'} × (1/t, 2/t)^{d''}`.
///
/// The normalization check compares `‖f_t‖_{p1,1}` with `p1`, the exact
/// norm of an indicator normalized to `|E|^{1/p1} = 1`.
pub fn family_f_t(split: &SplitSpec, p1: f64, t: f64) -> Result<CounterexampleFamily> {
    conjugate(p1)?;
    require_admissible(split, true)?;
    if !(t > 0.0 && t < 0.5) {
        return domain("f_t needs 0 < t < 1/2");
    }
    let (dp, dpp) = (split.d_prime() as f64, split.d_double_prime() as f64);
    let lo = split.place(&vec![t; split.d_prime()], &vec![1.0 / t; split.d_double_prime()]);
    let hi = split.place(&vec![2.0 * t; split.d_prime()], &vec![2.0 / t; split.d_double_prime()]);
    let set = BoxUnion::single(AxisBox::new(lo, hi)?);
    let height = t.powf((dpp - dp) / p1);
    let norm = indicator_lorentz_norm(set.measure(), height, p1)?;
    let normalization = NormalizationCheck::new("lorentz-p1-1-norm / p1", norm / p1, 1.0, Some(1.0)).enforce()?;
    Ok(CounterexampleFamily {
        kind: FamilyKind::FtBox,
        split: split.clone(),
        p1,
        params: FamilyParams { t: Some(t), ..Default::default() },
        component_measures: vec![set.measure()],
        set,
        height,
        normalization,
        field: LowerField::PrimedProduct {
            coef: t.powf(dpp / p1),
            t,
            double_lo: vec![1.0 / t; split.d_double_prime()],
            double_hi: vec![2.0 / t; split.d_double_prime()],
        },
    })
}

/// `K = (7/4)^{d'} (63/8)^{d''-1}`: `|E_R| = K log R` exactly when `d' = d''`.
pub fn e_r_constant(d_prime: usize, d_double_prime: usize) -> f64 {
    (7.0f64 / 4.0).powi(d_prime as i32) * (63.0f64 / 8.0).powi(d_double_prime as i32 - 1)
}

/// `E_R` sliced into `slices` logarithmic slabs in `y_d` (the last
/// double-primed coordinate); on each slab the coupled bounds use the
/// slab's geometric-mean `y_d`. `f_R = |E_R|^{-1/p1} χ_{E_R}`.
///
/// The measure check compares the sliced measure with `K log R`.
pub fn family_e_r(split: &SplitSpec, p1: f64, r: f64, slices: usize) -> Result<CounterexampleFamily> {
    conjugate(p1)?;
    require_admissible(split, false)?;
    if split.d_prime() != split.d_double_prime() {
        return Err(Error::Admissibility("E_R needs d' = d'' = d/2".into()));
    }
    if !(r > 6.0) || slices == 0 {
        return domain("E_R needs R > 6 and at least one slice");
    }
    let (dp, dpp) = (split.d_prime(), split.d_double_prime());
    let double = split.double_primed();
    let yd = *double.last().expect("d'' >= 2");
    let lr = r.ln();
    let mut boxes = Vec::with_capacity(slices);
    for k in 0..slices {
        let (a, b) = ((lr * k as f64 / slices as f64).exp(), (lr * (k + 1) as f64 / slices as f64).exp());
        let m = (a * b).sqrt();
        let mut lo = vec![0.0; split.d()];
        let mut hi = vec![0.0; split.d()];
        for &j in split.primed() {
            lo[j] = 0.25 / m;
            hi[j] = 2.0 / m;
        }
        for &j in &double[..dpp - 1] {
            lo[j] = m / 8.0;
            hi[j] = 8.0 * m;
        }
        lo[yd] = a;
        hi[yd] = b;
        boxes.push(AxisBox::new(lo, hi)?);
    }
    let set = BoxUnion::new(boxes)?;
    let measure = set.measure();
    let exact = e_r_constant(dp, dpp) * lr;
    let normalization = NormalizationCheck::new("|E_R| / (K log R)", measure, exact, Some(exact)).enforce()?;
    Ok(CounterexampleFamily {
        kind: FamilyKind::ErSlab,
        split: split.clone(),
        p1,
        params: FamilyParams { r: Some(r), resolution: Some(slices), ..Default::default() },
        component_measures: set.boxes().iter().map(AxisBox::volume).collect(),
        height: measure.powf(-1.0 / p1),
        set,
        normalization,
        field: LowerField::Slab { r },
    })
}

/// Log-dyadic cover of `{z ∈ (0,1)^m : Π z_j < c}`: per-axis cells
/// `(2^{-k-1}, 2^{-k}]` for `k < depth` and `(0, 2^{-depth}]`; cells cut by
/// the boundary are bisected `refine` more times along their longest side
/// (in log scale when the cell is away from 0), and each remaining undecided
/// leaf is trimmed from its lower end to the exact measure it contains.
pub fn hyperbolic_boxes(m: usize, c: f64, depth: usize, refine: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut edges = vec![0.0];
    for k in (0..=depth).rev() {
        edges.push(0.5f64.powi(k as i32));
    }
    let cells = edges.len() - 1;
    let mut out = Vec::new();
    let mut idx = vec![0usize; m];
    loop {
        let lo: Vec<f64> = idx.iter().map(|&i| edges[i]).collect();
        let hi: Vec<f64> = idx.iter().map(|&i| edges[i + 1]).collect();
        split_cell(lo, hi, c, refine, &mut out);
        // odometer
        let mut j = 0;
        while j < m {
            idx[j] += 1;
            if idx[j] < cells {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == m {
            break;
        }
    }
    out
}

/// `|{z ∈ Π(lo_j, hi_j) : Π z_j < c}|` by inclusion–exclusion over the
/// lower orthants `Π(0, a_j)` at the box corners.
fn box_hyperbolic_measure(lo: &[f64], hi: &[f64], c: f64) -> f64 {
    let m = lo.len();
    let mut total = 0.0;
    for mask in 0u32..(1 << m) {
        let mut prod = 1.0;
        for j in 0..m {
            prod *= if mask >> j & 1 == 1 { lo[j] } else { hi[j] };
        }
        if prod > 0.0 {
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * prod * product_levelset_exact(m, 1.0, prod / c);
        }
    }
    total
}

fn split_cell(lo: Vec<f64>, hi: Vec<f64>, c: f64, refine: usize, out: &mut Vec<(Vec<f64>, Vec<f64>)>) {
    let phi: f64 = hi.iter().product();
    let plo: f64 = lo.iter().product();
    if phi <= c {
        out.push((lo, hi));
        return;
    }
    if plo >= c {
        return;
    }
    let mid = |l: f64, h: f64| if l > 0.0 { (l * h).sqrt() } else { 0.5 * h };
    if refine == 0 {
        // trim along the widest side, from the lower end, to the exact
        // measure of the set inside the leaf
        let vol: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).product();
        let inside = box_hyperbolic_measure(&lo, &hi, c).clamp(0.0, vol);
        if inside > 0.0 {
            let j = (0..lo.len()).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).expect("m >= 1");
            let mut top = hi;
            top[j] = lo[j] + (top[j] - lo[j]) * inside / vol;
            out.push((lo, top));
        }
        return;
    }
    let width = |j: usize| if lo[j] > 0.0 { (hi[j] / lo[j]).ln() } else { f64::INFINITY };
    let j = (0..lo.len()).max_by(|&a, &b| width(a).total_cmp(&width(b))).expect("m >= 1");
    let cut = mid(lo[j], hi[j]);
    let (mut hi_a, mut lo_b) = (hi.clone(), lo.clone());
    hi_a[j] = cut;
    lo_b[j] = cut;
    split_cell(lo, hi_a, c, refine - 1, out);
    split_cell(lo_b, hi, c, refine - 1, out);
}

/// Bisection levels per primed dimension applied to boundary cells of the
/// dyadic cover.
pub const DYADIC_REFINE: usize = 3;

/// `E_t(β)` as a box union, its exact measure, and `|E_t|` per the
/// two-sided level-set estimate.
struct EtBeta {
    set: BoxUnion,
    exact: f64,
    estimate: f64,
}

fn build_e_t_beta(split: &SplitSpec, p1: f64, t: f64, beta: f64, depth: usize) -> Result<EtBeta> {
    let (dp, dpp) = (split.d_prime(), split.d_double_prime());
    let x = t.powi(dp as i32) * beta.powf(p1);
    if !(x > 1.0) {
        return Err(Error::Admissibility(format!("E_t(β) needs t^d' β^p1 > 1, got {x}")));
    }
    let boxes = hyperbolic_boxes(dp, 1.0 / x, depth, DYADIC_REFINE * dp)
        .into_iter()
        .map(|(zl, zh)| {
            let pl: Vec<f64> = zl.iter().map(|z| z * t).collect();
            let ph: Vec<f64> = zh.iter().map(|z| z * t).collect();
            AxisBox::new(split.place(&pl, &vec![1.0 / t; dpp]), split.place(&ph, &vec![2.0 / t; dpp]))
        })
        .collect::<Result<Vec<_>>>()?;
    let set = BoxUnion::new(boxes)?;
    let tdd = t.powi(-(dpp as i32));
    let exact = product_levelset_exact(dp, t, beta.powf(p1)) * tdd;
    let estimate = beta.powf(-p1) * (2.0 + x).ln().powi(dp as i32 - 1) * tdd;
    Ok(EtBeta { set, exact, estimate })
}

fn window_box(split: &SplitSpec, plo: f64, phi: f64, dlo: f64, dhi: f64) -> Result<AxisBox> {
    let (dp, dpp) = (split.d_prime(), split.d_double_prime());
    AxisBox::new(split.place(&vec![plo; dp], &vec![dlo; dpp]), split.place(&vec![phi; dp], &vec![dhi; dpp]))
}

/// `E_t = {Π' y_j^{-1/p1} > β, y' ∈ (0,t)^{d'}, y'' ∈ (1/t, 2/t)^{d''}}` with
/// a dyadic cover of the primed constraint. The lower field is the constant
/// `t^{d'' - d'/p0} β |E_t|` on `(0,t)^{d'} × (1/t, 2/t)^{d''}`.
pub fn family_e_t_beta(split: &SplitSpec, p1: f64, t: f64, beta: f64, depth: usize) -> Result<CounterexampleFamily> {
    let p0 = conjugate(p1)?;
    require_admissible(split, false)?;
    if !(t > 0.0 && t <= 0.25) || !(beta > 0.0) {
        return domain("E_t(β) needs 0 < t <= 1/4 and β > 0");
    }
    let e = build_e_t_beta(split, p1, t, beta, depth)?;
    let measure = e.set.measure();
    let normalization = NormalizationCheck::new("|E_t| / level-set estimate", measure, e.estimate, Some(e.exact)).enforce()?;
    let (dp, dpp) = (split.d_prime() as f64, split.d_double_prime() as f64);
    let value = t.powf(dpp - dp / p0) * beta * measure;
    Ok(CounterexampleFamily {
        kind: FamilyKind::EtBeta,
        split: split.clone(),
        p1,
        params: FamilyParams { t: Some(t), beta: Some(beta), resolution: Some(depth), ..Default::default() },
        component_measures: vec![measure],
        set: e.set,
        height: 1.0,
        normalization,
        field: LowerField::Constant { windows: vec![(window_box(split, 0.0, t, 1.0 / t, 2.0 / t)?, value)] },
    })
}

/// `F_N = ∪_{j=2}^N E_{2^{-j}}` with `β_j = N^{1/p1} 2^{j d'/p1}`, for
/// `d' = d''`. The lower field on `(2^{-j-1}, 2^{-j})^{d'} × (2^j, 2^{j+1})^{d''}`
/// is `t^{d'' - d'/p0} β_j |E_{2^{-j}}|`.
pub fn family_f_n(split: &SplitSpec, p1: f64, n: usize, depth: usize) -> Result<CounterexampleFamily> {
    let p0 = conjugate(p1)?;
    require_admissible(split, false)?;
    if split.d_prime() != split.d_double_prime() {
        return Err(Error::Admissibility("F_N needs d' = d''".into()));
    }
    if n < 2 {
        return domain("F_N needs N >= 2");
    }
    let dp = split.d_prime() as f64;
    let parts = (2..=n)
        .into_par_iter()
        .map(|j| {
            let t = 0.5f64.powi(j as i32);
            let beta = (n as f64).powf(1.0 / p1) * t.powf(-dp / p1);
            build_e_t_beta(split, p1, t, beta, depth).map(|e| (t, beta, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut set: Option<BoxUnion> = None;
    let mut component_measures = Vec::with_capacity(parts.len());
    let mut windows = Vec::with_capacity(parts.len());
    for (t, beta, e) in parts {
        let m = e.set.measure();
        component_measures.push(m);
        windows.push((window_box(split, t / 2.0, t, 1.0 / t, 2.0 / t)?, t.powf(dp - dp / p0) * beta * m));
        set = Some(match set {
            None => e.set,
            Some(s) => s.disjoint_union(e.set)?,
        });
    }
    let set = set.expect("N >= 2");
    let target = (2.0 + n as f64).ln().powf(dp - 1.0);
    let normalization = NormalizationCheck::new("|F_N| / log^(d'-1)(2+N)", set.measure(), target, None).enforce()?;
    Ok(CounterexampleFamily {
        kind: FamilyKind::FnUnion,
        split: split.clone(),
        p1,
        params: FamilyParams { n: Some(n), resolution: Some(depth), ..Default::default() },
        set,
        height: 1.0,
        component_measures,
        normalization,
        field: LowerField::Constant { windows },
    })
}

impl CounterexampleFamily {
    pub fn measure(&self) -> f64 {
        self.set.measure()
    }

    /// The family member as a nonnegative sum of separable box indicators.
    pub fn function(&self) -> Result<SeparableFunction> {
        let terms = self
            .set
            .boxes()
            .iter()
            .map(|b| {
                let factors = b.lo.iter().zip(&b.hi).map(|(&l, &h)| Piece::indicator(l, h)).collect::<Result<_>>()?;
                Ok(Term { coef: self.height, factors })
            })
            .collect::<Result<Vec<_>>>()?;
        SeparableFunction::new(self.split.d(), terms)
    }

    pub fn lower_field(&self, x: &[f64]) -> f64 {
        let p1 = self.p1;
        let primed_prod = || self.split.primed().iter().map(|&j| x[j].powf(-1.0 / p1)).product::<f64>();
        match &self.field {
            LowerField::PrimedProduct { coef, t, double_lo, double_hi } => {
                let inside = self.split.primed().iter().all(|&j| x[j] > 0.0 && x[j] < *t)
                    && self
                        .split
                        .double_primed()
                        .iter()
                        .enumerate()
                        .all(|(k, &j)| x[j] > double_lo[k] && x[j] < double_hi[k]);
                if inside {
                    coef * primed_prod()
                } else {
                    0.0
                }
            }
            LowerField::Slab { r } => {
                let double = self.split.double_primed();
                let xd = x[*double.last().expect("d'' >= 1")];
                let inside = xd > 4.0
                    && xd < r - 1.0
                    && self.split.primed().iter().all(|&j| x[j] > 0.0 && x[j] < 1.0 / xd)
                    && double[..double.len() - 1].iter().all(|&j| x[j] > xd / 2.0 && x[j] < 2.0 * xd);
                if inside {
                    r.ln().powf(-1.0 / p1) * xd.powf(-(self.split.d_prime() as f64) / p1) * primed_prod()
                } else {
                    0.0
                }
            }
            LowerField::Constant { windows } => {
                windows.iter().find(|(w, _)| open_contains(w, x)).map(|(_, v)| *v).unwrap_or(0.0)
            }
        }
    }

    /// `|{lower field > λ}|`, exact up to one 1-D quadrature for `E_R`.
    pub fn field_levelset(&self, lambda: f64, cfg: &QuadConfig) -> Result<f64> {
        if !(lambda > 0.0) {
            return domain("level must be positive");
        }
        let p1 = self.p1;
        let dp = self.split.d_prime();
        match &self.field {
            LowerField::PrimedProduct { coef, t, double_lo, double_hi } => {
                let vol: f64 = double_lo.iter().zip(double_hi).map(|(l, h)| h - l).product();
                Ok(product_levelset_exact(dp, *t, (lambda / coef).powf(p1)) * vol)
            }
            LowerField::Slab { r } => {
                let lr = r.ln();
                let dpp = self.split.d_double_prime();
                let nu_base = lambda.powf(p1) * lr;
                // integrate over w = ln x_d
                let g = |w: f64| {
                    let xd = w.exp();
                    product_levelset_exact(dp, 1.0 / xd, nu_base * xd.powi(dp as i32))
                        * (1.5 * xd).powi(dpp as i32 - 1)
                        * xd
                };
                Ok(integrate(g, 4f64.ln(), (r - 1.0).ln(), cfg)?.value)
            }
            LowerField::Constant { windows } => {
                Ok(windows.iter().filter(|(_, v)| *v > lambda).map(|(w, _)| w.volume()).sum())
            }
        }
    }

    /// The growth law the lower field is expected to follow, without its
    /// constant. Errors outside the regime where the law is stated.
    pub fn predicted_levelset(&self, lambda: f64) -> Result<f64> {
        let p1 = self.p1;
        let dp = self.split.d_prime() as i32;
        match self.kind {
            FamilyKind::FtBox => {
                let t = self.params.t.expect("f_t has t");
                let x = t.powi(dp - self.split.d_double_prime() as i32) * lambda.powf(p1);
                if x < 1.0 {
                    return Err(Error::Admissibility(format!("t^(d'-d'') λ^p1 = {x} < 1")));
                }
                Ok(lambda.powf(-p1) * x.ln().powi(dp - 1))
            }
            FamilyKind::ErSlab => {
                let lr = self.params.r.expect("E_R has R").ln();
                if lambda <= lr.powf(-1.0 / p1) {
                    return Err(Error::Admissibility("E_R growth law needs λ > (log R)^(-1/p1)".into()));
                }
                Ok(lambda.powf(-p1) * (2.0 + lambda.powf(p1) * lr).ln().powi(dp - 1))
            }
            FamilyKind::EtBeta | FamilyKind::FnUnion => {
                let LowerField::Constant { windows } = &self.field else { unreachable!() };
                Ok(windows.iter().filter(|(_, v)| *v > lambda).map(|(w, _)| w.volume()).sum())
            }
        }
    }

    /// Smallest window value of a piecewise-constant field.
    pub fn crss_value(&self) -> Option<f64> {
        match &self.field {
            LowerField::Constant { windows } => windows.iter().map(|(_, v)| *v).reduce(f64::min),
            _ => None,
        }
    }

    /// Deterministic probe points inside the field's window: primed
    /// coordinates spread over three decades below their upper end, the
    /// others at the log-centroid of their window.
    pub fn probe_points(&self, count: usize) -> Vec<Vec<f64>> {
        let dp = self.split.d_prime();
        let dpp = self.split.d_double_prime();
        let golden = 0.618_033_988_749_895_f64;
        let spread = |i: usize, k: usize| ((i + 1) as f64 * golden * (k + 1) as f64).fract();
        (0..count)
            .map(|i| match &self.field {
                LowerField::PrimedProduct { t, double_lo, double_hi, .. } => {
                    let primed: Vec<f64> = (0..dp).map(|k| t * 10f64.powf(-0.3 - 2.7 * spread(i, k))).collect();
                    let double: Vec<f64> = double_lo.iter().zip(double_hi).map(|(l, h)| (l * h).sqrt()).collect();
                    self.split.place(&primed, &double)
                }
                LowerField::Slab { r } => {
                    let xd = (4.0 * (r - 1.0)).sqrt();
                    let primed: Vec<f64> = (0..dp).map(|k| 10f64.powf(-0.3 - 2.7 * spread(i, k)) / xd).collect();
                    self.split.place(&primed, &vec![xd; dpp])
                }
                LowerField::Constant { windows } => {
                    let (w, _) = &windows[i % windows.len()];
                    let x: Vec<f64> = w
                        .lo
                        .iter()
                        .zip(&w.hi)
                        .enumerate()
                        .map(|(j, (&l, &h))| {
                            if l > 0.0 {
                                (l * h).sqrt()
                            } else {
                                h * 10f64.powf(-0.3 - 2.7 * spread(i, j))
                            }
                        })
                        .collect();
                    x
                }
            })
            .collect()
    }
}

fn open_contains(b: &AxisBox, x: &[f64]) -> bool {
    x.iter().zip(b.lo.iter().zip(&b.hi)).all(|(&v, (&l, &h))| v > l && v < h)
}

/// `∫ H_t^α(x, y) χ_S(y) dy` for a box union, sharing 1-D integrals between
/// boxes with the same side.
pub fn kernel_on_set(alpha: &TypeMultiIndex, t: f64, set: &BoxUnion, x: &[f64], cfg: &QuadConfig) -> Result<f64> {
    if alpha.dim() != set.dim() || x.len() != set.dim() {
        return domain("kernel_on_set dimension mismatch");
    }
    let params: Vec<KernelParams1D> =
        alpha.components().iter().map(|&a| KernelParams1D::new(a, t)).collect::<Result<_>>()?;
    let mut cache: HashMap<(usize, u64, u64), f64> = HashMap::new();
    let mut total = 0.0;
    for b in set.boxes() {
        let mut prod = 1.0;
        for j in 0..x.len() {
            let key = (j, b.lo[j].to_bits(), b.hi[j].to_bits());
            let v = match cache.get(&key) {
                Some(v) => *v,
                None => {
                    let v = kernel_piece_integral(&params[j], &Piece::indicator(b.lo[j], b.hi[j])?, x[j], cfg)?;
                    cache.insert(key, v);
                    v
                }
            };
            prod *= v;
            if prod == 0.0 {
                break;
            }
        }
        total += prod;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// divergence witness at p0

/// Decreasing profile `g*` of the probe function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProbeProfile {
    /// `s^{-1/p0} [log(2 + 1/s)]^{-1 - (m-1)/p1}`: the weighted integral
    /// diverges like `log log`.
    LogEndpoint,
    /// `s^{-1/p0 - δ}`.
    Power { delta: f64 },
}

impl ProbeProfile {
    /// `ln g*(s)` given `ln(1/s)`.
    fn ln_value(&self, ln_inv_s: f64, m: usize, p0: f64, p1: f64) -> f64 {
        match *self {
            ProbeProfile::LogEndpoint => {
                // ln(2 + 1/s) without overflow
                let l = if ln_inv_s > 1.0 { ln_inv_s + (2.0 * (-ln_inv_s).exp()).ln_1p() } else { (2.0 + ln_inv_s.exp()).ln() };
                ln_inv_s / p0 - (1.0 + (m as f64 - 1.0) / p1) * l.ln()
            }
            ProbeProfile::Power { delta } => ln_inv_s * (1.0 / p0 + delta),
        }
    }
}

/// `ln Σ_{k<m} U^k/k!`.
fn ln_partial_exp(m: usize, u: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..m {
        term *= u / k as f64;
        sum += term;
    }
    sum.ln()
}

/// Volume density of `U = Σ u_j` for `u ∈ (0, L)^m`.
fn sum_density(m: usize, l: f64, u: f64) -> f64 {
    let mut binom = 1.0;
    let mut total = 0.0;
    let fact: f64 = (1..m).map(|k| k as f64).product();
    for k in 0..=m {
        let z = u - k as f64 * l;
        if z > 0.0 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * binom * z.powi(m as i32 - 1) / fact;
        }
        binom = binom * (m - k) as f64 / (k + 1) as f64;
    }
    total.max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessStep {
    pub epsilon: f64,
    /// `∫_{(ε,1)^m} f Ψ`.
    pub pairing: f64,
    /// `∫ (f χ)* (Ψ χ)*` from the numeric rearrangements.
    pub rearranged_pairing: f64,
    pub growth: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceWitness {
    pub m: usize,
    pub p0: f64,
    pub p1: f64,
    pub probe: ProbeProfile,
    pub steps: Vec<WitnessStep>,
    /// Some growth factor is below 2.
    pub stalled: bool,
}

/// Truncated pairings `∫_{(ε,1)^m} f Ψ` with `Ψ = Π y_j^{-1/p1}` over the
/// `m = d̃` minimal coordinates, where `f = g*(|{Ψ > Ψ(y)}|)` is the
/// rearrangement of the probe placed to attain equality in the
/// Hardy–Littlewood inequality.
///
/// With `U = -Σ ln y_j` everything depends on `U` alone: `|{Ψ > Ψ(y)}| =
/// e^{-U} Σ_{k<m} U^k/k!`, `dy = e^{-U} du`, and the `u`-volume of
/// `{Σ u_j ∈ dU}` is the Irwin–Hall density.
pub fn divergence_witness_p0(
    alpha: &TypeMultiIndex,
    probe: ProbeProfile,
    epsilons: &[f64],
    cfg: &QuadConfig,
) -> Result<DivergenceWitness> {
    let Exponents::Pencil(ex) = exponents(alpha, 0.0) else {
        return Err(Error::Admissibility("the p0 witness needs a negative minimal type".into()));
    };
    if let ProbeProfile::Power { delta } = probe {
        if !(delta > 0.0) {
            return domain("power probe needs δ > 0");
        }
    }
    if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return domain("truncations must lie in (0, 1)");
    }
    let (m, p0, p1) = (ex.tilde_d, ex.p0, ex.p1);
    let ln_f = move |u: f64| probe.ln_value(u - ln_partial_exp(m, u), m, p0, p1);
    // g* must be nonincreasing, i.e. f nondecreasing in U
    let probe_u: Vec<f64> = (0..=400).map(|k| k as f64 * 0.25).collect();
    if probe_u.windows(2).any(|w| ln_f(w[1]) < ln_f(w[0]) - 1e-12) {
        return domain("probe profile is not decreasing");
    }
    let mut steps: Vec<WitnessStep> = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let l = -eps.ln();
        let top = m as f64 * l;
        let seg = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
            let mut s = 0.0;
            for k in 0..m {
                s += integrate(g, k as f64 * l, (k + 1) as f64 * l, cfg)?.value;
            }
            Ok(s)
        };
        let pairing = seg(&|u: f64| (ln_f(u) + u / p1 - u).exp() * sum_density(m, l, u))?;
        let rearranged_pairing = rearranged_pairing(m, p1, l, &ln_f, top, cfg)?;
        let growth = steps.last().map(|s| pairing / s.pairing);
        steps.push(WitnessStep { epsilon: eps, pairing, rearranged_pairing, growth });
    }
    let stalled = steps.iter().filter_map(|s| s.growth).any(|g| g < 2.0);
    Ok(DivergenceWitness { m, p0, p1, probe, steps, stalled })
}

/// Builds the distribution curves of `f χ` and `Ψ χ` on `(ε,1)^m`, rearranges
/// both through [`Rearrangement::from_curve`] and integrates the product.
fn rearranged_pairing(
    m: usize,
    p1: f64,
    l: f64,
    ln_f: &dyn Fn(f64) -> f64,
    top: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    // measure of {U > u0} in y-space
    let tail = |u0: f64| -> Result<f64> {
        let mut s = 0.0;
        for k in 0..m {
            let (a, b) = ((k as f64 * l).max(u0), (k + 1) as f64 * l);
            if b > a {
                s += integrate(|u: f64| (-u).exp() * sum_density(m, l, u), a, b, cfg)?.value;
            }
        }
        Ok(s)
    };
    let total = tail(0.0)?;
    // level λ of a U-increasing function with values between v(0) and v(top)
    let curve_of = |ln_v: &dyn Fn(f64) -> f64| -> Result<DistributionCurve> {
        let (lo, hi) = (ln_v(0.0).exp(), ln_v(top).exp());
        let mut lambdas = log_grid(lo * 0.999, hi, 32);
        lambdas.retain(|&x| x < hi);
        let samples = lambdas
            .iter()
            .map(|&lam| {
                let target = lam.ln();
                let u0 = if ln_v(0.0) > target {
                    0.0
                } else {
                    let (mut a, mut b) = (0.0, top);
                    for _ in 0..200 {
                        let c = 0.5 * (a + b);
                        if ln_v(c) > target {
                            b = c;
                        } else {
                            a = c;
                        }
                    }
                    b
                };
                Ok(CurveSample { lambda: lam, measure: tail(u0)?, stderr: 0.0 })
            })
            .collect::<Result<Vec<_>>>()?;
        DistributionCurve::new(samples, CurveMethod::ClosedForm)
    };
    let grid = log_grid(total * 1e-12, total, 64);
    let rf = Rearrangement::from_curve(&curve_of(ln_f)?, &grid)?;
    let rpsi = Rearrangement::from_curve(&curve_of(&|u: f64| u / p1)?, &grid)?;
    // ∫_0^total f* Ψ* ds in w = ln s; both factors are bounded
    let g = |w: f64| {
        let s = w.exp();
        rf.eval(s) * rpsi.eval(s) * s
    };
    let lt = total.ln();
    Ok(integrate(g, lt - 60.0, lt, cfg)?.value)
}

/// `|{y ∈ (0,1)^m : Π y_j^{-1/p1} > λ}|`.
pub fn psi_product_levelset(m: usize, p1: f64, lambda: f64) -> f64 {
    product_levelset_exact(m, 1.0, lambda.powf(p1))
}

/// `s^{-1/p1} [log(2 + 1/s)]^{(m-1)/p1}`, the lower profile of `Ψ*`.
pub fn psi_star_profile(m: usize, p1: f64, s: f64) -> f64 {
    s.powf(-1.0 / p1) * (2.0 + 1.0 / s).ln().powf((m as f64 - 1.0) / p1)
}
