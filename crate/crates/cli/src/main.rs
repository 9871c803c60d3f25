use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lagmax::constructions::{
    divergence_witness_p0, family_e_r, family_e_t_beta, family_f_n, family_f_t, kernel_on_set, sharpness_cube,
    CounterexampleFamily, ProbeProfile, SplitSpec,
};
use lagmax::experiments::{run, ExperimentConfig, RunOutput, Scenario, Table};
use lagmax::fit::fit_line;
use lagmax::kernel::{h1d, lower_bound_a, lower_bound_b, upper_envelope, Envelope, KernelParams1D, TypeMultiIndex};
use lagmax::measure::{
    default_s_grid, dist_fn, gaussian_tail_levelset, levelset_bound_check, log_grid, lorentz_p1_norm,
    lorentz_zygmund_norm, rearrange, weak_orlicz_quasinorm, AxisBox, BoxUnion, DistMethod, DistributionCurve,
    Sampling,
};
use lagmax::operator::{apply_kernel, apply_semigroup, maximal, SeparableFunction, TimeGrid};
use lagmax::pencil::{classify, exponents, pencil_sweep, Exponents, PencilPoint};
use lagmax::quad::QuadConfig;

#[derive(Parser)]
#[command(name = "lagmax", version, about = "Laguerre heat-kernel maximal operator laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the one-dimensional kernel and its bounds.
    Kernel(KernelArgs),
    /// Apply the kernel or the semigroup to a separable function.
    Apply(ApplyArgs),
    /// Maximal function over a log-spaced time grid.
    Maximal(MaximalArgs),
    /// Distribution function of a separable function on a box.
    Distfn(DistArgs),
    /// Decreasing rearrangement of a separable function on a box.
    Rearrange(DistArgs),
    /// Lorentz, Lorentz-Zygmund and weak-Orlicz norms of a separable function.
    Norms(NormArgs),
    /// Exact product level sets and the Gaussian-tail variant.
    Levelset(LevelsetArgs),
    /// Regime of the maximal operator at an exponent, or the regime diagram.
    Pencil(PencilArgs),
    /// Counterexample families and their level-set growth.
    Counterexample(CounterexampleArgs),
    /// Run one verification scenario.
    Verify(VerifyArgs),
    /// Run every scenario.
    Report(ReportArgs),
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    /// Times, comma separated.
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    xi: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
    #[arg(long, value_enum, default_value_t = EnvelopeKind::None)]
    envelope: EnvelopeKind,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvelopeKind {
    None,
    Upper,
    LowerA,
    LowerB,
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorKind {
    /// `∫ H_t(x, y) |f(y)| dy`
    Kernel,
    /// `T_t f(x)`
    Semigroup,
}

#[derive(Args)]
struct ApplyArgs {
    /// Type multi-index, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    alpha: Vec<f64>,
    /// Function, e.g. `box(0.5,1)*powexp(-0.2,0,0,1)`.
    #[arg(long)]
    f: String,
    /// Points `x1,x2;y1,y2`.
    #[arg(long)]
    x: String,
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
    #[arg(long, value_enum, default_value_t = OperatorKind::Kernel)]
    operator: OperatorKind,
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MaximalArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    alpha: Vec<f64>,
    #[arg(long)]
    f: String,
    #[arg(long)]
    x: String,
    #[arg(long, default_value_t = 1e-4)]
    t_min: f64,
    #[arg(long, default_value_t = 1e2)]
    t_max: f64,
    #[arg(long, default_value_t = 32)]
    points_per_decade: usize,
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodKind {
    MonteCarlo,
    LogMonteCarlo,
    Grid,
}

#[derive(Args)]
struct DistArgs {
    #[arg(long)]
    f: String,
    /// Box `lo1,lo2:hi1,hi2`.
    #[arg(long)]
    domain: String,
    /// λ sweep `lo:hi:per_decade`.
    #[arg(long, default_value = "1e-2:1e6:8")]
    lambdas: String,
    #[arg(long, value_enum, default_value_t = MethodKind::MonteCarlo)]
    method: MethodKind,
    /// Samples for Monte Carlo, cells per axis for the grid.
    #[arg(long, default_value_t = 1_000_000)]
    budget: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary destination; stderr when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct NormArgs {
    #[command(flatten)]
    dist: DistArgs,
    /// Exponent of the Lorentz and weak norms.
    #[arg(long)]
    p: f64,
    /// Power of the logarithmic weight.
    #[arg(long, default_value_t = 0.0)]
    npow: f64,
}

#[derive(Args)]
struct LevelsetArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Levels ν as `lo:hi:per_decade`.
    #[arg(long, default_value = "1e-3:1e9:4")]
    nu: String,
    /// Use the Gaussian-damped product with this exponent.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PencilArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Vec<f64>,
    /// A number, `p0`, `p1`, or `lorentz:p:q`.
    #[arg(long)]
    p: Option<String>,
    /// Emit the regime diagram of uniform types instead.
    #[arg(long)]
    sweep: bool,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Grid of `α` for the sweep, `lo:hi:n`.
    #[arg(long, default_value = "-0.99:1:200", allow_hyphen_values = true)]
    alphas: String,
    /// Grid of `1/p` for the sweep, `lo:hi:n`.
    #[arg(long, default_value = "0.005:1:200")]
    inv_p: String,
    #[arg(long, default_value_t = 0.0)]
    min_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    #[value(name = "ft")]
    Ft,
    #[value(name = "ER")]
    Er,
    #[value(name = "Etbeta")]
    Etbeta,
    #[value(name = "FN")]
    Fn,
    #[value(name = "cube")]
    Cube,
    #[value(name = "p0witness")]
    P0witness,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long, value_enum)]
    kind: FamilyArg,
    /// `key=v1,v2`, repeatable; keys depend on the family.
    #[arg(long)]
    params: Vec<String>,
    /// Slices for `E_R`, dyadic depth for `E_t(β)` and `F_N`, nodes per decade for the cube.
    #[arg(long)]
    depth: Option<usize>,
    /// Probe points for the kernel cross-check; 0 skips it.
    #[arg(long, default_value_t = 0)]
    probes: usize,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    a: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    scenario: String,
    /// TOML or JSON config; the scenario's built-in config when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "lagmax-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, required = true)]
    all: bool,
    #[arg(long, default_value = "lagmax-out")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every check passed (always true outside `verify`/`report`).
fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Kernel(a) => kernel_cmd(a).map(|_| true),
        Command::Apply(a) => apply_cmd(a).map(|_| true),
        Command::Maximal(a) => maximal_cmd(a).map(|_| true),
        Command::Distfn(a) => distfn_cmd(a).map(|_| true),
        Command::Rearrange(a) => rearrange_cmd(a).map(|_| true),
        Command::Norms(a) => norms_cmd(a).map(|_| true),
        Command::Levelset(a) => levelset_cmd(a).map(|_| true),
        Command::Pencil(a) => pencil_cmd(a).map(|_| true),
        Command::Counterexample(a) => counterexample_cmd(a).map(|_| true),
        Command::Verify(a) => verify_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

// ---------------------------------------------------------------------------
// parsing and output helpers

fn parse_points(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|p| p.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("bad coordinate `{v}`"))).collect())
        .collect()
}

/// `lo:hi:per_decade` as a log grid.
fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else { bail!("sweep `{s}` is not lo:hi:per_decade") };
    let (lo, hi, n) = (lo.parse::<f64>()?, hi.parse::<f64>()?, n.parse::<usize>()?);
    if !(lo > 0.0 && hi > lo && n > 0) {
        bail!("sweep `{s}` needs 0 < lo < hi and per_decade > 0");
    }
    Ok(log_grid(lo, hi, n))
}

/// `lo:hi:n` as a linear grid.
fn parse_linear(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else { bail!("grid `{s}` is not lo:hi:n") };
    let (lo, hi, n) = (lo.parse::<f64>()?, hi.parse::<f64>()?, n.parse::<usize>()?);
    if n < 2 {
        bail!("grid `{s}` needs n >= 2");
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

fn parse_box(s: &str) -> Result<BoxUnion> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| anyhow!("domain `{s}` is not lo1,lo2:hi1,hi2"))?;
    let parse = |v: &str| v.split(',').map(|x| x.trim().parse::<f64>().map_err(anyhow::Error::from)).collect::<Result<Vec<_>>>();
    Ok(BoxUnion::single(AxisBox::new(parse(lo)?, parse(hi)?)?))
}

fn parse_params(items: &[String]) -> Result<std::collections::BTreeMap<String, Vec<f64>>> {
    let mut out = std::collections::BTreeMap::new();
    for item in items {
        let (k, v) = item.split_once('=').ok_or_else(|| anyhow!("parameter `{item}` is not key=value"))?;
        let vals = v.split(',').map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>()?;
        out.insert(k.trim().to_string(), vals);
    }
    Ok(out)
}

fn emit(table: &Table, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => table.write(File::create(p).with_context(|| format!("creating {}", p.display()))?)?,
        None => table.write(io::stdout().lock())?,
    }
    Ok(())
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => io::stderr().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn coord_columns(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

fn table_with(kind: &str, mut cols: Vec<String>, tail: &[&str]) -> Table {
    cols.extend(tail.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    Table::new(kind, &refs)
}

// ---------------------------------------------------------------------------
// commands

fn kernel_cmd(a: KernelArgs) -> Result<()> {
    let env = Envelope::default();
    let mut t = Table::new("kernel", &["a", "t", "xi", "eta", "kernel", "bound"]);
    for &time in &a.t {
        let p = KernelParams1D::new(a.alpha, time)?;
        for &xi in &a.xi {
            for &eta in &a.eta {
                let bound = match a.envelope {
                    EnvelopeKind::None => f64::NAN,
                    EnvelopeKind::Upper => upper_envelope(&p, &env, xi, eta),
                    EnvelopeKind::LowerA => lower_bound_a(&p, xi, eta).unwrap_or(f64::NAN),
                    EnvelopeKind::LowerB => lower_bound_b(&p, xi, eta).unwrap_or(f64::NAN),
                };
                t.push(vec![a.alpha.into(), time.into(), xi.into(), eta.into(), h1d(&p, xi, eta).into(), bound.into()]);
            }
        }
    }
    emit(&t, a.out.as_deref())
}

fn apply_cmd(a: ApplyArgs) -> Result<()> {
    let alpha = TypeMultiIndex::new(a.alpha)?;
    let f: SeparableFunction = a.f.parse()?;
    let cfg = QuadConfig::with_rel_tol(a.rel_tol);
    let mut t = table_with("apply", coord_columns(alpha.dim()), &["t", "value"]);
    for x in parse_points(&a.x)? {
        for &time in &a.t {
            let v = match a.operator {
                OperatorKind::Kernel => apply_kernel(&alpha, time, &f, &x, &cfg)?,
                OperatorKind::Semigroup => apply_semigroup(&alpha, time, &f, &x, &cfg)?,
            };
            let mut row: Vec<_> = x.iter().map(|&v| v.into()).collect();
            row.extend([time.into(), v.into()]);
            t.push(row);
        }
    }
    emit(&t, a.out.as_deref())
}

fn maximal_cmd(a: MaximalArgs) -> Result<()> {
    let alpha = TypeMultiIndex::new(a.alpha)?;
    let f: SeparableFunction = a.f.parse()?;
    let cfg = QuadConfig::with_rel_tol(a.rel_tol);
    let grid =
        TimeGrid { t_min: a.t_min, t_max: a.t_max, points_per_decade: a.points_per_decade, ..TimeGrid::default() };
    let mut t = table_with("maximal", coord_columns(alpha.dim()), &["value", "argmax_t", "at_grid_boundary"]);
    for x in parse_points(&a.x)? {
        let m = maximal(&alpha, &f, &x, &grid, &cfg)?;
        if m.at_grid_boundary {
            eprintln!("warning: supremum at the time-grid boundary for x = {x:?}");
        }
        let mut row: Vec<_> = x.iter().map(|&v| v.into()).collect();
        row.extend([m.value.into(), m.argmax_t.into(), m.at_grid_boundary.into()]);
        t.push(row);
    }
    emit(&t, a.out.as_deref())
}

fn curve_of(a: &DistArgs) -> Result<DistributionCurve> {
    let f: SeparableFunction = a.f.parse()?;
    let domain = parse_box(&a.domain)?;
    if domain.dim() != f.dim() {
        bail!("domain dimension {} does not match the function's {}", domain.dim(), f.dim());
    }
    let method = match a.method {
        MethodKind::MonteCarlo => DistMethod::MonteCarlo { budget: a.budget, seed: a.seed, sampling: Sampling::Uniform },
        MethodKind::LogMonteCarlo => {
            DistMethod::MonteCarlo { budget: a.budget, seed: a.seed, sampling: Sampling::LogUniform }
        }
        MethodKind::Grid => DistMethod::Grid { per_axis: a.budget },
    };
    let curve = dist_fn(|x: &[f64]| f.eval(x).abs(), &domain, &parse_sweep(&a.lambdas)?, &method)?;
    if curve.budget_exhausted() {
        eprintln!("warning: relative standard error above 5% at some λ");
    }
    Ok(curve)
}

fn curve_summary(a: &DistArgs, curve: &DistributionCurve) -> serde_json::Value {
    json!({
        "function": a.f,
        "domain": a.domain,
        "method": curve.method(),
        "budget": a.budget,
        "seed": a.seed,
        "points": curve.samples().len(),
        "max_relative_stderr": curve.max_relative_stderr(),
        "budget_exhausted": curve.budget_exhausted(),
    })
}

fn distfn_cmd(a: DistArgs) -> Result<()> {
    let curve = curve_of(&a)?;
    let mut t = Table::new("distfn", &["lambda", "measure", "stderr"]);
    for s in curve.samples() {
        t.push(vec![s.lambda.into(), s.measure.into(), s.stderr.into()]);
    }
    emit(&t, a.out.as_deref())?;
    emit_json(&curve_summary(&a, &curve), a.summary.as_deref())
}

fn rearrange_cmd(a: DistArgs) -> Result<()> {
    let curve = curve_of(&a)?;
    let r = rearrange(&curve)?;
    let mut t = Table::new("rearrangement", &["s", "f_star"]);
    for s in default_s_grid() {
        t.push(vec![s.into(), r.eval(s).into()]);
    }
    emit(&t, a.out.as_deref())?;
    emit_json(&curve_summary(&a, &curve), a.summary.as_deref())
}

fn norms_cmd(a: NormArgs) -> Result<()> {
    let curve = curve_of(&a.dist)?;
    let r = rearrange(&curve)?;
    let lorentz = lorentz_p1_norm(a.p, &r)?;
    let lz = lorentz_zygmund_norm(a.p, a.npow, &r)?;
    let weak = weak_orlicz_quasinorm(a.p, a.npow, &curve);
    let mut summary = curve_summary(&a.dist, &curve);
    summary["p"] = json!(a.p);
    summary["npow"] = json!(a.npow);
    summary["lorentz_p1"] = json!({"value": lorentz.value, "rel_change": lorentz.rel_change()});
    summary["lorentz_zygmund"] = json!({"value": lz.value, "rel_change": lz.rel_change()});
    summary["weak_orlicz"] = match weak {
        Ok(v) => json!({"value": v}),
        Err(e) => json!({"error": e.to_string()}),
    };
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    match &a.dist.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn levelset_cmd(a: LevelsetArgs) -> Result<()> {
    let nus = parse_sweep(&a.nu)?;
    match a.gamma {
        None => {
            let mut t = Table::new("levelset", &["d", "t", "nu", "exact", "bound", "ratio", "lower_applies"]);
            for nu in nus {
                let r = levelset_bound_check(a.d, a.t, nu);
                t.push(vec![
                    a.d.into(),
                    a.t.into(),
                    nu.into(),
                    r.exact.into(),
                    r.bound.into(),
                    r.ratio.into(),
                    r.lower_applies.into(),
                ]);
            }
            emit(&t, a.out.as_deref())
        }
        Some(gamma) => {
            let cfg = QuadConfig::with_rel_tol(1e-8);
            let mut t = Table::new("gaussian-tail", &["d", "gamma", "sigma", "nu", "measure", "band_sum", "bound"]);
            for nu in nus {
                let g = gaussian_tail_levelset(a.d, gamma, a.sigma, nu, &cfg)?;
                t.push(vec![
                    a.d.into(),
                    gamma.into(),
                    a.sigma.into(),
                    nu.into(),
                    g.measure.into(),
                    g.band_sum.into(),
                    g.bound.into(),
                ]);
            }
            emit(&t, a.out.as_deref())
        }
    }
}

fn pencil_cmd(a: PencilArgs) -> Result<()> {
    if a.sweep {
        let rows = pencil_sweep(a.d, &parse_linear(&a.alphas)?, &parse_linear(&a.inv_p)?, a.min_tol)?;
        let mut t = Table::new("pencil", &["alpha", "inv_p", "regime", "log_power"]);
        for r in rows {
            let n = r.log_power.map(|n| n.into()).unwrap_or_else(|| "".into());
            t.push(vec![r.alpha.into(), r.inv_p.into(), r.regime.as_str().into(), n]);
        }
        return emit(&t, a.out.as_deref());
    }
    if a.alpha.is_empty() {
        bail!("pencil needs --alpha (or --sweep)");
    }
    let alpha = TypeMultiIndex::new(a.alpha)?;
    let p = a.p.ok_or_else(|| anyhow!("pencil needs --p (a number, p0, p1 or lorentz:p:q)"))?;
    let point = match p.as_str() {
        "p0" => PencilPoint::P0Endpoint,
        "p1" => PencilPoint::P1Endpoint,
        s if s.starts_with("lorentz:") => {
            let v: Vec<f64> = s[8..].split(':').map(str::parse).collect::<std::result::Result<_, _>>()?;
            let [p, q] = v[..] else { bail!("expected lorentz:p:q") };
            PencilPoint::Lorentz { p, q }
        }
        s => PencilPoint::Lp { p: s.parse()? },
    };
    let verdict = classify(&alpha, point, a.min_tol);
    let ex = match exponents(&alpha, a.min_tol) {
        Exponents::Pencil(ex) => json!(ex),
        Exponents::Standard { .. } => json!(null),
    };
    let out = json!({
        "alpha": alpha.components(),
        "point": point,
        "regime": verdict.regime.as_str(),
        "log_power": verdict.log_power,
        "exponents": ex,
    });
    let text = serde_json::to_string_pretty(&out)? + "\n";
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn counterexample_cmd(a: CounterexampleArgs) -> Result<()> {
    let params = parse_params(&a.params)?;
    let get = |k: &str, default: &[f64]| params.get(k).cloned().unwrap_or_else(|| default.to_vec());
    let one = |k: &str, default: f64| get(k, &[default])[0];
    let cfg = QuadConfig::with_rel_tol(1e-9);
    let p1 = -2.0 / a.a;
    let p0 = 2.0 / (2.0 + a.a);
    let mut t = Table::new("counterexample", &["parameter", "lambda", "measure", "predicted", "ratio"]);
    let push = |t: &mut Table, param: f64, lam: f64, m: f64, pred: f64| {
        t.push(vec![param.into(), lam.into(), m.into(), pred.into(), (m / pred).into()]);
    };
    let probe_floor = |alpha: &TypeMultiIndex,
                       fam: &CounterexampleFamily,
                       time: &dyn Fn(&[f64]) -> f64,
                       reference: &dyn Fn(&[f64]) -> f64|
     -> Result<Option<f64>> {
        if a.probes == 0 {
            return Ok(None);
        }
        let mut c = f64::INFINITY;
        for x in fam.probe_points(a.probes) {
            c = c.min(fam.height * kernel_on_set(alpha, time(&x), &fam.set, &x, &cfg)? / reference(&x));
        }
        Ok(Some(c))
    };
    let mut summary = json!({ "kind": a.kind.to_possible_value().map(|v| v.get_name().to_string()), "a": a.a, "p0": p0, "p1": p1 });
    match a.kind {
        FamilyArg::Ft => {
            let split = SplitSpec::leading(one("d", 5.0) as usize, one("dprime", 2.0) as usize)?;
            let lam = one("lambda", 1.0);
            let mut ms = Vec::new();
            for time in get("t", &[1e-2, 1e-4, 1e-6, 1e-8]) {
                let fam = family_f_t(&split, p1, time)?;
                let m = fam.field_levelset(lam, &cfg)?;
                push(&mut t, time, lam, m, fam.predicted_levelset(lam)?);
                ms.push(m);
            }
            summary["increasing_as_t_decreases"] = json!(ms.windows(2).all(|w| w[1] > w[0]));
        }
        FamilyArg::Er => {
            let split = SplitSpec::leading(4, 2)?;
            let lam = one("lambda", 1.0);
            let slices = a.depth.unwrap_or(16);
            let mut ratios = Vec::new();
            let mut ms = Vec::new();
            let mut floor = None;
            for r in get("r", &[1e2, 1e6, 1e12]) {
                let fam = family_e_r(&split, p1, r, slices)?;
                let m = fam.field_levelset(lam, &cfg)?;
                let pred = fam.predicted_levelset(lam)?;
                push(&mut t, r, lam, m, pred);
                ratios.push(m / pred);
                ms.push(m);
                if floor.is_none() {
                    let alpha = TypeMultiIndex::uniform(4, a.a)?;
                    floor = probe_floor(&alpha, &fam, &|x| 1.0 / x[3], &|x| fam.lower_field(x))?;
                }
            }
            let c = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
            summary["fitted_c"] = json!(c);
            summary["max_factor_from_c"] = json!(ratios.iter().map(|r| (r / c).max(c / r)).fold(0.0, f64::max));
            summary["increasing_in_r"] = json!(ms.windows(2).all(|w| w[1] > w[0]));
            summary["kernel_floor"] = json!(floor);
        }
        FamilyArg::Etbeta => {
            let split = SplitSpec::leading(one("d", 5.0) as usize, one("dprime", 2.0) as usize)?;
            let time = one("t", 1e-2);
            let beta = one("beta", time.powf(-0.75));
            let fam = family_e_t_beta(&split, p1, time, beta, a.depth.unwrap_or(10))?;
            let v = fam.crss_value().unwrap_or(f64::NAN);
            push(&mut t, time, v, fam.measure(), fam.normalization.target);
            let alpha = TypeMultiIndex::uniform(split.d(), a.a)?;
            summary["normalization"] = json!(fam.normalization);
            summary["kernel_floor"] = json!(probe_floor(&alpha, &fam, &|_| time, &|_| v * fam.height)?);
        }
        FamilyArg::Fn => {
            let split = SplitSpec::leading(4, 2)?;
            let gamma = (split.d_prime() - 1) as f64 * p0 / p1;
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for n in get("n", &[8.0, 32.0, 128.0]) {
                let fam = family_f_n(&split, p1, n as usize, a.depth.unwrap_or(12))?;
                let lam = fam.crss_value().unwrap_or(f64::NAN) / 2.0;
                let m = fam.field_levelset(lam, &cfg)?;
                let e = fam.measure();
                push(&mut t, n, lam, m, e);
                xs.push((2.0 + n).ln().ln());
                ys.push((lam.powf(p0) * m / (e * (2.0 + 1.0 / e).ln().powf(gamma))).ln());
            }
            summary["regression"] = json!(fit_line(&xs, &ys)?);
            summary["target_slope"] = json!(gamma);
        }
        FamilyArg::Cube => {
            let alpha = TypeMultiIndex::uniform(2, a.a)?;
            let cube = sharpness_cube(&alpha, 0.0)?;
            let nodes = log_grid(1e-20, 20.0, a.depth.unwrap_or(4));
            let grid = TimeGrid { t_min: 1e-3, t_max: 1e2, points_per_decade: 16, ..TimeGrid::default() };
            let table = cube.maximal_table(&nodes, &grid, &cfg)?;
            let lambdas = params.get("lambda").cloned().unwrap_or_else(|| log_grid(10.0, 1e3, 8));
            let (mut lx, mut ly, mut llx, mut lly) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for lam in lambdas {
                let m = table.levelset(lam);
                let pred = lam.powf(-p1) * (2.0 + lam).ln();
                push(&mut t, lam, lam, m, pred);
                lx.push(lam.ln());
                ly.push(m.ln());
                llx.push(lam.ln().ln());
                lly.push((m * lam.powf(p1)).ln());
            }
            summary["power_law"] = json!(fit_line(&lx, &ly)?);
            summary["log_factor"] = json!(fit_line(&llx, &lly)?);
        }
        FamilyArg::P0witness => {
            let alpha = TypeMultiIndex::uniform(one("d", 2.0) as usize, a.a)?;
            let probe = match params.get("delta") {
                Some(d) => ProbeProfile::Power { delta: d[0] },
                None => ProbeProfile::LogEndpoint,
            };
            let w = divergence_witness_p0(&alpha, probe, &get("epsilon", &[1e-2, 1e-4, 1e-6]), &cfg)?;
            for s in &w.steps {
                push(&mut t, s.epsilon, f64::NAN, s.pairing, s.rearranged_pairing);
            }
            summary["witness"] = json!(w);
        }
    }
    emit(&t, a.out.as_deref())?;
    emit_json(&summary, a.summary.as_deref())
}

fn print_summary(out: &RunOutput) {
    let r = &out.report;
    println!("{}: {}", r.scenario, if r.passed { "PASS" } else { "FAIL" });
    for c in &r.checks {
        println!("  {} {} = {:.6e} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured, c.rule);
    }
    for w in &r.warnings {
        println!("  warning: {w}");
    }
}

fn run_one(cfg: &ExperimentConfig, out_dir: &Path) -> Result<bool> {
    let out = run(cfg)?;
    let dir = cfg.output_dir.as_deref().unwrap_or(out_dir);
    out.write_to(dir)?;
    print_summary(&out);
    Ok(out.report.passed)
}

fn verify_cmd(a: VerifyArgs) -> Result<bool> {
    let scenario: Scenario = a.scenario.parse()?;
    let cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_for(scenario),
    };
    if cfg.scenario != scenario {
        bail!("config is for `{}`, not `{scenario}`", cfg.scenario);
    }
    run_one(&cfg, &a.out_dir)
}

fn report_cmd(a: ReportArgs) -> Result<bool> {
    let mut all = true;
    for sc in Scenario::ALL {
        all &= run_one(&ExperimentConfig::default_for(sc), &a.out_dir)?;
    }
    println!("overall: {}", if all { "PASS" } else { "FAIL" });
    Ok(all)
}
