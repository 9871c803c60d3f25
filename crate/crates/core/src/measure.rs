//! Distribution functions, decreasing rearrangements, Lorentz-type norms and
//! exact level-set formulas.
//!
//! Monte Carlo estimates are stratified; every stratum draws from its own
//! ChaCha stream derived from the seed, so results do not depend on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad::{integrate, integrate_axis, Axis, QuadConfig};

/// Relative standard error above which a Monte Carlo curve is flagged.
pub const BUDGET_REL_STDERR: f64 = 0.05;

/// Axis-aligned box `Π (lo_j, hi_j)` in the positive orthant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return domain("box corners must have equal, nonzero dimension");
        }
        if lo.iter().zip(&hi).any(|(&l, &h)| !(l >= 0.0 && h > l && h.is_finite())) {
            return domain(format!("box needs 0 <= lo < hi < inf per axis, got {lo:?} {hi:?}"));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&l, &h))| v > l && v < h)
    }

    /// Interiors intersect.
    pub fn overlaps(&self, other: &AxisBox) -> bool {
        (0..self.dim()).all(|j| self.lo[j] < other.hi[j] && other.lo[j] < self.hi[j])
    }
}

/// Finite union of boxes with pairwise-disjoint interiors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxUnion {
    dim: usize,
    boxes: Vec<AxisBox>,
}

impl BoxUnion {
    /// Verifies disjointness with a sweep over the first coordinate.
    pub fn new(boxes: Vec<AxisBox>) -> Result<Self> {
        let dim = match boxes.first() {
            Some(b) => b.dim(),
            None => return domain("a box union needs at least one box"),
        };
        if boxes.iter().any(|b| b.dim() != dim) {
            return domain("boxes in a union must share one dimension");
        }
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        order.sort_by(|&i, &j| boxes[i].lo[0].total_cmp(&boxes[j].lo[0]));
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if boxes[j].lo[0] >= boxes[i].hi[0] {
                    break;
                }
                if boxes[i].overlaps(&boxes[j]) {
                    return domain(format!("boxes {i} and {j} overlap"));
                }
            }
        }
        Ok(Self { dim, boxes })
    }

    pub fn single(b: AxisBox) -> Self {
        Self { dim: b.dim(), boxes: vec![b] }
    }

    /// Concatenates two unions whose bounding boxes are disjoint; only the
    /// bounding boxes are compared.
    pub fn disjoint_union(mut self, other: BoxUnion) -> Result<Self> {
        if self.dim != other.dim {
            return domain("cannot join unions of different dimension");
        }
        if self.bounding_box().overlaps(&other.bounding_box()) {
            return domain("bounding boxes of the two unions overlap");
        }
        self.boxes.extend(other.boxes);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn measure(&self) -> f64 {
        self.boxes.iter().map(AxisBox::volume).sum()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(x))
    }

    pub fn bounding_box(&self) -> AxisBox {
        let mut lo = self.boxes[0].lo.clone();
        let mut hi = self.boxes[0].hi.clone();
        for b in &self.boxes[1..] {
            for j in 0..self.dim {
                lo[j] = lo[j].min(b.lo[j]);
                hi[j] = hi[j].max(b.hi[j]);
            }
        }
        AxisBox { lo, hi }
    }
}

/// How a distribution curve was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveMethod {
    ExactBox,
    ClosedForm,
    MonteCarlo,
    Grid,
    /// Quadrature over the simplex of a star-shaped level set.
    Radial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub lambda: f64,
    pub measure: f64,
    pub stderr: f64,
}

/// Sampled `λ ↦ |{F > λ}|`, sorted by increasing `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionCurve {
    samples: Vec<CurveSample>,
    method: CurveMethod,
}

impl DistributionCurve {
    /// Sorts by `λ` and rejects increases larger than three combined
    /// standard errors.
    pub fn new(mut samples: Vec<CurveSample>, method: CurveMethod) -> Result<Self> {
        if samples.is_empty() {
            return domain("a distribution curve needs at least one sample");
        }
        if samples.iter().any(|s| !(s.lambda > 0.0) || !(s.measure >= 0.0) || !(s.stderr >= 0.0)) {
            return domain("curve samples need λ > 0 and nonnegative measure and stderr");
        }
        samples.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        for w in samples.windows(2) {
            let slack = 3.0 * (w[0].stderr + w[1].stderr) + 1e-12 * w[0].measure;
            if w[1].measure > w[0].measure + slack {
                return domain(format!(
                    "distribution curve increases between λ = {} and λ = {}",
                    w[0].lambda, w[1].lambda
                ));
            }
        }
        Ok(Self { samples, method })
    }

    pub fn from_closed_form(lambdas: &[f64], measure: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = lambdas.iter().map(|&l| CurveSample { lambda: l, measure: measure(l), stderr: 0.0 }).collect();
        Self::new(samples, CurveMethod::ClosedForm)
    }

    pub fn samples(&self) -> &[CurveSample] {
        &self.samples
    }

    pub fn method(&self) -> CurveMethod {
        self.method
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.lambda).collect()
    }

    pub fn measures(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.measure).collect()
    }

    pub fn max_relative_stderr(&self) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.measure > 0.0)
            .map(|s| s.stderr / s.measure)
            .fold(0.0, f64::max)
    }

    /// Some sample has relative standard error above 5%.
    pub fn budget_exhausted(&self) -> bool {
        self.max_relative_stderr() > BUDGET_REL_STDERR
    }
}

/// Coordinates in which Monte Carlo points are drawn uniformly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    #[default]
    Uniform,
    /// Uniform in `ln x_j`, weighted by `Π x_j`; resolves small level sets
    /// near the coordinate hyperplanes.
    LogUniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistMethod {
    MonteCarlo { budget: usize, seed: u64, sampling: Sampling },
    /// Midpoint rule on `per_axis^d` cells of each box; the reported error is
    /// the change from the half-resolution grid.
    Grid { per_axis: usize },
}

impl DistMethod {
    pub fn monte_carlo(budget: usize, seed: u64) -> Self {
        DistMethod::MonteCarlo { budget, seed, sampling: Sampling::Uniform }
    }
}

/// Distribution curve of the indicator `height · χ_S`.
pub fn dist_fn_indicator(set: &BoxUnion, height: f64, lambdas: &[f64]) -> Result<DistributionCurve> {
    let m = set.measure();
    let samples = lambdas
        .iter()
        .map(|&l| CurveSample { lambda: l, measure: if l < height { m } else { 0.0 }, stderr: 0.0 })
        .collect();
    DistributionCurve::new(samples, CurveMethod::ExactBox)
}

/// `λ ↦ |{x ∈ domain : F(x) > λ}|` by sampling or a midpoint grid.
pub fn dist_fn<F>(f: F, domain_set: &BoxUnion, lambdas: &[f64], method: &DistMethod) -> Result<DistributionCurve>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if lambdas.is_empty() {
        return domain("no λ values requested");
    }
    match *method {
        DistMethod::MonteCarlo { budget, seed, sampling } => monte_carlo(&f, domain_set, lambdas, budget, seed, sampling),
        DistMethod::Grid { per_axis } => grid_curve(&f, domain_set, lambdas, per_axis),
    }
}

struct Stratum {
    lo: Vec<f64>,
    width: Vec<f64>,
    volume: f64,
}

fn strata_for(b: &AxisBox, budget: usize, sampling: Sampling) -> Result<(Vec<Stratum>, usize)> {
    let d = b.dim();
    let (lo, hi): (Vec<f64>, Vec<f64>) = match sampling {
        Sampling::Uniform => (b.lo.clone(), b.hi.clone()),
        Sampling::LogUniform => {
            if b.lo.iter().any(|&l| l <= 0.0) {
                return domain("log-uniform sampling needs boxes away from the coordinate hyperplanes");
            }
            (b.lo.iter().map(|v| v.ln()).collect(), b.hi.iter().map(|v| v.ln()).collect())
        }
    };
    let per_axis = (((budget / 2).max(1) as f64).powf(1.0 / d as f64).floor() as usize).max(1);
    let count = per_axis.pow(d as u32);
    let per_stratum = (budget / count).max(2);
    let width: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l) / per_axis as f64).collect();
    let volume: f64 = width.iter().product();
    let strata = (0..count)
        .map(|mut flat| {
            let mut corner = Vec::with_capacity(d);
            for j in 0..d {
                corner.push(lo[j] + (flat % per_axis) as f64 * width[j]);
                flat /= per_axis;
            }
            Stratum { lo: corner, width: width.clone(), volume }
        })
        .collect();
    Ok((strata, per_stratum))
}

fn monte_carlo<F>(
    f: &F,
    set: &BoxUnion,
    lambdas: &[f64],
    budget: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<DistributionCurve>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if budget < 2 {
        return Err(Error::Config("Monte Carlo budget must be at least 2".into()));
    }
    let weights: Vec<f64> = match sampling {
        Sampling::Uniform => set.boxes().iter().map(AxisBox::volume).collect(),
        Sampling::LogUniform => vec![1.0; set.boxes().len()],
    };
    let total_w: f64 = weights.iter().sum();
    let mut measure = vec![0.0; lambdas.len()];
    let mut variance = vec![0.0; lambdas.len()];
    let mut stream = 0u64;
    for (b, w) in set.boxes().iter().zip(&weights) {
        let share = ((budget as f64) * w / total_w).round().max(2.0) as usize;
        let (strata, k) = strata_for(b, share, sampling)?;
        let base = stream;
        stream += strata.len() as u64;
        let d = b.dim();
        // (value, weight) pairs, k per stratum, in stratum order
        let mut draws = vec![(0.0, 0.0); strata.len() * k];
        draws.par_chunks_mut(k).enumerate().for_each(|(h, out)| {
            let st = &strata[h];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(base + h as u64);
            let mut x = vec![0.0; d];
            for slot in out.iter_mut() {
                let mut jac = st.volume;
                for j in 0..d {
                    let u = st.lo[j] + rng.random::<f64>() * st.width[j];
                    x[j] = match sampling {
                        Sampling::Uniform => u,
                        Sampling::LogUniform => {
                            let v = u.exp();
                            jac *= v;
                            v
                        }
                    };
                }
                *slot = (f(&x), jac);
            }
        });
        for chunk in draws.chunks(k) {
            for (i, &lam) in lambdas.iter().enumerate() {
                let n = chunk.len() as f64;
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for &(v, jac) in chunk {
                    let y = if v > lam { jac } else { 0.0 };
                    s1 += y;
                    s2 += y * y;
                }
                let mean = s1 / n;
                measure[i] += mean;
                variance[i] += ((s2 / n - mean * mean).max(0.0) * n / (n - 1.0)) / n;
            }
        }
    }
    let samples = lambdas
        .iter()
        .zip(measure.iter().zip(&variance))
        .map(|(&l, (&m, &v))| CurveSample { lambda: l, measure: m, stderr: v.sqrt() })
        .collect();
    DistributionCurve::new(samples, CurveMethod::MonteCarlo)
}

fn midpoint_measures<F: Fn(&[f64]) -> f64 + Sync>(f: &F, set: &BoxUnion, lambdas: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; lambdas.len()];
    for b in set.boxes() {
        let d = b.dim();
        let width: Vec<f64> = b.lo.iter().zip(&b.hi).map(|(l, h)| (h - l) / n as f64).collect();
        let cell: f64 = width.iter().product();
        let counts = (0..n.pow(d as u32))
            .into_par_iter()
            .fold(
                || vec![0usize; lambdas.len()],
                |mut acc, mut flat| {
                    let x: Vec<f64> = (0..d)
                        .map(|j| {
                            let i = flat % n;
                            flat /= n;
                            b.lo[j] + (i as f64 + 0.5) * width[j]
                        })
                        .collect();
                    let v = f(&x);
                    for (c, &l) in acc.iter_mut().zip(lambdas) {
                        if v > l {
                            *c += 1;
                        }
                    }
                    acc
                },
            )
            .reduce(|| vec![0; lambdas.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
        for (o, c) in out.iter_mut().zip(counts) {
            *o += c as f64 * cell;
        }
    }
    out
}

fn grid_curve<F: Fn(&[f64]) -> f64 + Sync>(
    f: &F,
    set: &BoxUnion,
    lambdas: &[f64],
    per_axis: usize,
) -> Result<DistributionCurve> {
    if per_axis < 2 {
        return Err(Error::Config("grid method needs at least 2 cells per axis".into()));
    }
    let fine = midpoint_measures(f, set, lambdas, per_axis);
    let coarse = midpoint_measures(f, set, lambdas, per_axis / 2);
    let samples = lambdas
        .iter()
        .zip(fine.iter().zip(&coarse))
        .map(|(&l, (&m, &c))| CurveSample { lambda: l, measure: m, stderr: (m - c).abs() })
        .collect();
    DistributionCurve::new(samples, CurveMethod::Grid)
}

/// Log-spaced grid with `per_decade` points per decade from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let n = ((b - a) * per_decade as f64).round().max(1.0) as usize;
    (0..=n).map(|k| 10f64.powf(a + (b - a) * k as f64 / n as f64)).collect()
}

/// Decreasing rearrangement stored at nodes `s_j` with values `f*(s_j)`.
///
/// Between positive nodes `f*` is interpolated as a power law; a cell whose
/// right node is zero holds the left value (the support ends there). Below
/// the first node the first cell's power law is continued, and above the
/// last node the same is done with the last cell unless the value is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rearrangement {
    s: Vec<f64>,
    v: Vec<f64>,
}

/// Default rearrangement grid: 64 points per decade over `[1e-10, 1e4]`.
pub fn default_s_grid() -> Vec<f64> {
    log_grid(1e-10, 1e4, 64)
}

/// Norm value with a resolution self-check from every other grid node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub coarse_value: f64,
}

impl NormEstimate {
    pub fn rel_change(&self) -> f64 {
        (self.value - self.coarse_value).abs() / self.value.abs().max(f64::MIN_POSITIVE)
    }
}

impl Rearrangement {
    pub fn from_nodes(s: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if s.len() < 2 || s.len() != v.len() {
            return domain("a rearrangement needs at least two nodes with values");
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) || !(s[0] > 0.0) {
            return domain("rearrangement nodes must be positive and increasing");
        }
        if v.iter().any(|x| !(*x >= 0.0)) || v.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            return domain("rearrangement values must be nonnegative and nonincreasing");
        }
        Ok(Self { s, v })
    }

    /// Tabulates an analytic `f*` on a node set.
    pub fn from_fn(s: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let v = s.iter().map(|&x| f(x)).collect();
        Self::from_nodes(s, v)
    }

    /// Generalized inverse `f*(s) = inf{λ : μ(λ) <= s}` of a sampled curve.
    ///
    /// The sampled measures inside the grid range are added as nodes so that
    /// jumps of `f*` fall on nodes.
    pub fn from_curve(curve: &DistributionCurve, grid: &[f64]) -> Result<Self> {
        let pts = curve.samples();
        let (gmin, gmax) = (grid[0], grid[grid.len() - 1]);
        let mut s: Vec<f64> = grid.to_vec();
        s.extend(pts.iter().map(|p| p.measure).filter(|&m| m > gmin && m < gmax));
        s.sort_by(f64::total_cmp);
        s.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
        let v = s.iter().map(|&x| invert_curve(pts, x)).collect::<Vec<_>>();
        // enforce monotonicity against sampling noise
        let mut v = v;
        for i in 1..v.len() {
            v[i] = v[i].min(v[i - 1]);
        }
        Self::from_nodes(s, v)
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.s, &self.v)
    }

    /// Power-law exponent of cell `j` between positive nodes, or `None`.
    fn cell_exponent(&self, j: usize) -> Option<f64> {
        let (v0, v1) = (self.v[j], self.v[j + 1]);
        if v0 > 0.0 && v1 > 0.0 {
            Some((v1 / v0).ln() / (self.s[j + 1] / self.s[j]).ln())
        } else {
            None
        }
    }

    /// Law used inside cell `j`: its own power law, or for the last positive
    /// cell before the support ends, the power law of the cell before it.
    fn cell_law(&self, j: usize) -> f64 {
        self.cell_exponent(j).or_else(|| if j > 0 { self.cell_exponent(j - 1) } else { None }).unwrap_or(0.0)
    }

    pub fn eval(&self, s: f64) -> f64 {
        if !(s > 0.0) {
            return f64::INFINITY;
        }
        let n = self.s.len();
        if s < self.s[0] {
            return match self.cell_exponent(0) {
                Some(k) => self.v[0] * (s / self.s[0]).powf(k),
                None => self.v[0],
            };
        }
        if s >= self.s[n - 1] {
            return match (self.v[n - 1] > 0.0, self.cell_exponent(n - 2)) {
                (true, Some(k)) => self.v[n - 1] * (s / self.s[n - 1]).powf(k),
                (true, None) => self.v[n - 1],
                (false, _) => 0.0,
            };
        }
        let j = self.s.partition_point(|&x| x <= s) - 1;
        self.v[j] * (s / self.s[j]).powf(self.cell_law(j))
    }

    /// `|{s : f*(s) > λ}|`, recovered from the nodes.
    pub fn distribution(&self, lambda: f64) -> f64 {
        let n = self.s.len();
        if self.v[0] <= lambda {
            return match self.cell_exponent(0) {
                Some(k) if k < 0.0 => self.s[0] * (lambda / self.v[0]).powf(1.0 / k),
                _ => 0.0,
            };
        }
        let j = self.v.partition_point(|&x| x > lambda);
        if j == n {
            return f64::INFINITY;
        }
        // f*(s_{j-1}) > λ >= f*(s_j)
        let k = self.cell_law(j - 1);
        if k < 0.0 {
            (self.s[j - 1] * (lambda / self.v[j - 1]).powf(1.0 / k)).min(self.s[j])
        } else {
            self.s[j]
        }
    }

    /// `∫_0^∞ f*(s) s^{1/p} w(s) ds/s` for a slowly varying weight `w`.
    fn weighted_integral(&self, p: f64, w: &dyn Fn(f64) -> f64, stride: usize) -> Result<f64> {
        let cfg = QuadConfig::with_rel_tol(1e-10);
        let idx: Vec<usize> = {
            let mut v: Vec<usize> = (0..self.s.len()).step_by(stride).collect();
            if *v.last().unwrap() != self.s.len() - 1 {
                v.push(self.s.len() - 1);
            }
            v
        };
        let sub = Rearrangement { s: idx.iter().map(|&i| self.s[i]).collect(), v: idx.iter().map(|&i| self.v[i]).collect() };
        let g = |u: f64| {
            let s = u.exp();
            sub.eval(s) * (u / p).exp() * w(s)
        };
        let mut total = 0.0;
        for j in 0..sub.s.len() - 1 {
            if sub.v[j] == 0.0 {
                break;
            }
            total += integrate(g, sub.s[j].ln(), sub.s[j + 1].ln(), &cfg)?.value;
        }
        // head
        let k0 = sub.cell_exponent(0);
        let head_exp = k0.unwrap_or(0.0) + 1.0 / p;
        if !(head_exp > 0.0) {
            return Err(Error::NormDivergence(format!("f*(s) s^(1/p) is not integrable at 0 (exponent {head_exp})")));
        }
        let s0 = sub.s[0];
        let head = integrate_axis(
            |s: f64| if s <= 0.0 { 0.0 } else { sub.eval(s) * s.powf(1.0 / p - 1.0) * w(s) },
            &Axis::new(0.0, s0).lo_exponent(head_exp - 1.0),
            &cfg,
        )?
        .value;
        total += head;
        // tail
        let n = sub.s.len();
        if sub.v[n - 1] > 0.0 {
            let k = sub.cell_exponent(n - 2).unwrap_or(0.0);
            if !(k + 1.0 / p < 0.0) {
                return Err(Error::NormDivergence(format!("f*(s) s^(1/p) does not decay at infinity (exponent {})", k + 1.0 / p)));
            }
            let sn = sub.s[n - 1];
            let tail = integrate_axis(
                |s: f64| sub.eval(s) * s.powf(1.0 / p - 1.0) * w(s),
                &Axis::new(sn, f64::INFINITY).tail_scale(sn),
                &cfg,
            )
            .map_err(|e| Error::NormDivergence(format!("tail: {e}")))?
            .value;
            total += tail;
        }
        Ok(total)
    }

    fn estimate(&self, p: f64, w: &dyn Fn(f64) -> f64) -> Result<NormEstimate> {
        if !(p > 0.0) {
            return domain(format!("Lorentz exponent must be positive, got {p}"));
        }
        Ok(NormEstimate { value: self.weighted_integral(p, w, 1)?, coarse_value: self.weighted_integral(p, w, 2)? })
    }
}

fn invert_curve(pts: &[CurveSample], s: f64) -> f64 {
    // first index with measure <= s
    let i = match pts.iter().position(|p| p.measure <= s) {
        Some(i) => i,
        None => {
            // s below every sampled measure: extrapolate the last two samples
            let n = pts.len();
            if n >= 2 && pts[n - 2].measure > pts[n - 1].measure {
                let (a, b) = (&pts[n - 2], &pts[n - 1]);
                let k = (b.lambda / a.lambda).ln() / (b.measure / a.measure).ln();
                return b.lambda * (s / b.measure).powf(k);
            }
            return pts[n - 1].lambda;
        }
    };
    if i == 0 {
        // all sampled levels already have measure <= s
        return 0.0;
    }
    let (a, b) = (&pts[i - 1], &pts[i]);
    if b.measure > 0.0 && a.measure > b.measure {
        let k = (b.lambda / a.lambda).ln() / (b.measure / a.measure).ln();
        a.lambda * (s / a.measure).powf(k)
    } else {
        b.lambda
    }
}

/// Decreasing rearrangement on the default grid.
pub fn rearrange(curve: &DistributionCurve) -> Result<Rearrangement> {
    Rearrangement::from_curve(curve, &default_s_grid())
}

/// `‖f‖_{p,1} = ∫_0^∞ f*(s) s^{1/p} ds/s`.
pub fn lorentz_p1_norm(p: f64, rearr: &Rearrangement) -> Result<NormEstimate> {
    rearr.estimate(p, &|_| 1.0)
}

/// `∫_0^∞ f*(s) s^{1/p0} log^{npow}(2 + 1/s) ds/s`.
pub fn lorentz_zygmund_norm(p0: f64, npow: f64, rearr: &Rearrangement) -> Result<NormEstimate> {
    if !(npow >= 0.0) {
        return domain("log power must be nonnegative");
    }
    rearr.estimate(p0, &|s: f64| (2.0 + 1.0 / s).ln().powf(npow))
}

/// Weak-Orlicz quasinorm: the least `η` with
/// `sup_λ (λ/η) log^{-npow/p1}(2 + λ/η) μ(λ)^{1/p1} <= 1`.
///
/// Errors when the supremum sits at the first or last sampled level.
pub fn weak_orlicz_quasinorm(p1: f64, npow: f64, curve: &DistributionCurve) -> Result<f64> {
    if !(p1 > 0.0 && npow >= 0.0) {
        return domain("weak-Orlicz quasinorm needs p1 > 0 and npow >= 0");
    }
    let pts = curve.samples();
    let phi = |eta: f64| -> (f64, usize) {
        let mut best = (0.0, 0);
        for (i, p) in pts.iter().enumerate() {
            let r = p.lambda / eta;
            let v = r * (2.0 + r).ln().powf(-npow / p1) * p.measure.powf(1.0 / p1);
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    };
    let start = pts.iter().map(|p| p.lambda * p.measure.powf(1.0 / p1)).fold(0.0, f64::max);
    if start == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (start, start);
    while phi(lo).0 <= 1.0 {
        lo *= 0.5;
    }
    while phi(hi).0 > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if phi(mid).0 > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
    }
    let (_, arg) = phi(hi);
    if arg == pts.len() - 1 || (arg == 0 && pts.len() > 1) {
        return Err(Error::RangeInsufficient(format!(
            "supremum attained at the sampled boundary λ = {}",
            pts[arg].lambda
        )));
    }
    Ok(hi)
}

/// `|{x ∈ (0,t)^d : Π x_j^{-1} > ν}|`, exactly.
pub fn product_levelset_exact(d: usize, t: f64, nu: f64) -> f64 {
    assert!(d >= 1 && t > 0.0 && nu > 0.0);
    let td = t.powi(d as i32);
    let u = (1.0 / (td * nu)).min(1.0);
    let l = (1.0 / u).ln();
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..d {
        term *= l / k as f64;
        sum += term;
    }
    td * u * sum
}

/// The level-set measure divided by `ν^{-1} log^{d-1}(2 + t^d ν)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelsetRatio {
    pub exact: f64,
    pub bound: f64,
    pub ratio: f64,
    /// `t^d ν >= 1`, where the same expression is also a lower bound.
    pub lower_applies: bool,
}

pub fn levelset_bound_check(d: usize, t: f64, nu: f64) -> LevelsetRatio {
    let exact = product_levelset_exact(d, t, nu);
    let td_nu = t.powi(d as i32) * nu;
    let bound = (2.0 + td_nu).ln().powi(d as i32 - 1) / nu;
    LevelsetRatio { exact, bound, ratio: exact / bound, lower_applies: td_nu >= 1.0 }
}

/// Measure of a star-shaped set `{s θ : 0 < s < R(θ)}`, `θ` on the simplex
/// `Σθ_j = 1`: `(1/d) ∫_Δ R(θ)^d dθ`.
///
/// Each simplex coordinate is integrated in logit form, `θ = r/(1 + e^{-w})`,
/// which turns power and logarithmic edge singularities into exponentially
/// decaying tails.
pub fn radial_levelset<R>(d: usize, radius: R, cfg: &QuadConfig) -> Result<f64>
where
    R: Fn(&[f64]) -> f64,
{
    if d == 0 {
        return domain("radial level sets need d >= 1");
    }
    let g = |theta: &[f64]| radius(theta).powi(d as i32);
    let mut theta = Vec::with_capacity(d);
    Ok(logit_simplex(&g, &mut theta, d, 1.0, cfg)? / d as f64)
}

fn logit_simplex<G: Fn(&[f64]) -> f64>(
    g: &G,
    prefix: &mut Vec<f64>,
    d: usize,
    rem: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    if prefix.len() + 1 == d {
        prefix.push(rem);
        let v = g(prefix);
        prefix.pop();
        return Ok(v);
    }
    let failure = std::cell::RefCell::new(None::<Error>);
    let scratch = std::cell::RefCell::new(prefix.clone());
    let branch = |theta: f64, rest: f64| -> f64 {
        let mut p = scratch.borrow_mut();
        let mut local = std::mem::take(&mut *p);
        local.push(theta);
        let v = if local.len() + 1 == d {
            local.push(rest);
            let v = g(&local);
            local.pop();
            v
        } else {
            match logit_simplex(g, &mut local, d, rest, cfg) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        local.pop();
        *p = local;
        v
    };
    // ∫_0^rem h(θ) dθ = ∫_0^∞ [h(rem σ(w)) + h(rem σ(-w))] rem σ(w) σ(-w) dw
    let integrand = |w: f64| {
        let e = (-w).exp();
        let hi = 1.0 / (1.0 + e);
        let lo = e / (1.0 + e);
        let jac = rem * hi * lo;
        if jac == 0.0 {
            return 0.0;
        }
        (branch(rem * hi, rem * lo) + branch(rem * lo, rem * hi)) * jac
    };
    let axis = Axis::new(0.0, f64::INFINITY).hints([1.0, 4.0, 16.0]).tail_scale(4.0);
    let r = integrate_axis(integrand, &axis, cfg)?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// Root in `ρ = ln s` of `d ρ + (σ e^ρ)^γ = target`.
fn gaussian_tail_log_radius(d: usize, gamma: f64, sigma: f64, target: f64) -> f64 {
    let g = |rho: f64| d as f64 * rho + (gamma * (sigma.ln() + rho)).exp();
    let dg = |rho: f64| d as f64 + gamma * (gamma * (sigma.ln() + rho)).exp();
    // bracket: g is increasing from -inf to +inf
    let mut lo = target / d as f64;
    while g(lo) > target {
        lo -= 1.0 + lo.abs();
    }
    let mut hi = lo + 1.0;
    while g(hi) < target {
        hi += 1.0 + (hi - lo);
    }
    let mut rho = 0.5 * (lo + hi);
    for _ in 0..100 {
        let v = g(rho) - target;
        if v == 0.0 {
            return rho;
        }
        if v > 0.0 {
            hi = rho;
        } else {
            lo = rho;
        }
        let next = rho - v / dg(rho);
        let next = if next >= lo && next <= hi { next } else { 0.5 * (lo + hi) };
        let done = (next - rho).abs() < 1e-15 * (1.0 + rho.abs());
        rho = next;
        if done {
            break;
        }
    }
    rho
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianTailLevelset {
    /// Level-set measure by radial quadrature.
    pub measure: f64,
    /// The band sum `Σ_k |{x ∈ (0,(k+1)/σ)^d : Π x_j^{-1} > ν e^{k^γ}}|`
    /// bounding the measure from above.
    pub band_sum: f64,
    /// `ν^{-1} log^{d-1}(2 + σ^{-d} ν)`.
    pub bound: f64,
}

/// `|{x ∈ ℝ₊^d : Π x_j^{-1} exp(-(σ Σ x_j)^γ) > ν}|`.
pub fn gaussian_tail_levelset(d: usize, gamma: f64, sigma: f64, nu: f64, cfg: &QuadConfig) -> Result<GaussianTailLevelset> {
    if d == 0 || !(gamma > 0.0 && sigma > 0.0 && nu > 0.0) {
        return domain("gaussian-tail level set needs d >= 1 and positive γ, σ, ν");
    }
    let measure = radial_levelset(
        d,
        |theta| {
            let target = -(nu.ln() + theta.iter().map(|t| t.ln()).sum::<f64>());
            gaussian_tail_log_radius(d, gamma, sigma, target).exp()
        },
        cfg,
    )?;
    // bands k < σ Σx < k+1 scale back to (0, (k+1)/σ)^d
    let mut band_sum = 0.0;
    for k in 0.. {
        let kf = k as f64;
        let term = product_levelset_exact(d, (kf + 1.0) / sigma, nu * kf.powf(gamma).exp());
        band_sum += term;
        if term < 1e-16 * band_sum || kf.powf(gamma) > 700.0 {
            break;
        }
    }
    let bound = (2.0 + sigma.powi(-(d as i32)) * nu).ln().powi(d as i32 - 1) / nu;
    Ok(GaussianTailLevelset { measure, band_sum, bound })
}
