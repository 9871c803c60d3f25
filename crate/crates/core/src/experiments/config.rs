//! Experiment configuration: a versioned TOML (or JSON) document naming a
//! scenario plus the grids, budgets and tolerances it runs with.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::TypeMultiIndex;
use crate::operator::TimeGrid;
use crate::quad::QuadConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scenario {
    Orthonormality,
    EigenDecay,
    ChapmanKolmogorov,
    EnvelopeSandwich,
    LevelsetLemma,
    Proposition1d,
    WeakType1d,
    SharpnessCube,
    LogEndpointD2,
    CounterexampleGrowth,
    P0Endpoint,
    P0Witness,
}

impl Scenario {
    pub const ALL: [Scenario; 12] = [
        Scenario::Orthonormality,
        Scenario::EigenDecay,
        Scenario::ChapmanKolmogorov,
        Scenario::EnvelopeSandwich,
        Scenario::LevelsetLemma,
        Scenario::Proposition1d,
        Scenario::WeakType1d,
        Scenario::SharpnessCube,
        Scenario::LogEndpointD2,
        Scenario::CounterexampleGrowth,
        Scenario::P0Endpoint,
        Scenario::P0Witness,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Scenario::Orthonormality => "orthonormality",
            Scenario::EigenDecay => "eigen-decay",
            Scenario::ChapmanKolmogorov => "chapman-kolmogorov",
            Scenario::EnvelopeSandwich => "envelope-sandwich",
            Scenario::LevelsetLemma => "levelset-lemma",
            Scenario::Proposition1d => "proposition-1d",
            Scenario::WeakType1d => "weak-type-1d",
            Scenario::SharpnessCube => "sharpness-cube",
            Scenario::LogEndpointD2 => "log-endpoint-d2",
            Scenario::CounterexampleGrowth => "counterexample-growth",
            Scenario::P0Endpoint => "p0-endpoint",
            Scenario::P0Witness => "p0-witness",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl TryFrom<String> for Scenario {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scenario> for String {
    fn from(s: Scenario) -> Self {
        s.id().to_string()
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.id() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Log-spaced λ sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSweep {
    pub lo: f64,
    pub hi: f64,
    pub per_decade: usize,
}

impl Default for LambdaSweep {
    fn default() -> Self {
        Self { lo: 1e-2, hi: 1e6, per_decade: 8 }
    }
}

impl LambdaSweep {
    pub fn points(&self) -> Vec<f64> {
        crate::measure::log_grid(self.lo, self.hi, self.per_decade)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    /// Sample count for every Monte Carlo estimate and sample cloud.
    pub mc_samples: usize,
    /// Wall-clock limit; when reached the run stops with a partial report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_seconds: Option<f64>,
}

impl Default for Budget {
    fn default() -> Self {
        Self { mc_samples: 1_000_000, max_seconds: None }
    }
}

/// Scenario knob: a number or a list of numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Num(f64),
    List(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub alpha: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub time_grid: TimeGrid,
    #[serde(default)]
    pub lambdas: LambdaSweep,
    /// Evaluation points for pointwise checks; empty means the scenario's own.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x_probes: Vec<f64>,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default = "default_quad_tol")]
    pub quad_rel_tol: f64,
    /// Relative tolerance used to decide which coordinates attain `min α`.
    #[serde(default)]
    pub min_tol: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Param>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_quad_tol() -> f64 {
    1e-9
}

/// Overlays `patch` on `base`, table by table.
fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ExperimentConfig {
    /// The built-in configuration of a scenario.
    pub fn default_for(scenario: Scenario) -> Self {
        let alpha = match scenario {
            Scenario::Orthonormality | Scenario::EigenDecay | Scenario::ChapmanKolmogorov => vec![-0.5],
            Scenario::EnvelopeSandwich | Scenario::Proposition1d | Scenario::WeakType1d => vec![-0.5],
            Scenario::LevelsetLemma => vec![-0.5; 3],
            Scenario::SharpnessCube | Scenario::LogEndpointD2 | Scenario::P0Witness => vec![-0.5; 2],
            Scenario::CounterexampleGrowth => vec![-0.5; 4],
            Scenario::P0Endpoint => vec![-0.5; 3],
        };
        let mut cfg = Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            scenario,
            alpha,
            seed: 0x5eed_0001,
            time_grid: TimeGrid::default(),
            lambdas: LambdaSweep::default(),
            x_probes: Vec::new(),
            budget: Budget::default(),
            quad_rel_tol: default_quad_tol(),
            min_tol: 0.0,
            tolerances: BTreeMap::new(),
            params: BTreeMap::new(),
            output_dir: None,
        };
        match scenario {
            Scenario::EnvelopeSandwich => cfg.budget.mc_samples = 100_000,
            Scenario::WeakType1d => {
                cfg.time_grid = TimeGrid { t_min: 1e-6, t_max: 1e2, points_per_decade: 16, ..TimeGrid::default() };
                cfg.lambdas = LambdaSweep { lo: 1e-2, hi: 1e6, per_decade: 8 };
            }
            Scenario::SharpnessCube => {
                cfg.time_grid = TimeGrid { t_min: 1e-3, t_max: 1e2, points_per_decade: 16, ..TimeGrid::default() };
                cfg.lambdas = LambdaSweep { lo: 10.0, hi: 1e3, per_decade: 8 };
            }
            // the top level is limited by the smallest tabulated node
            Scenario::LogEndpointD2 => cfg.lambdas = LambdaSweep { lo: 1e-2, hi: 1e3, per_decade: 8 },
            _ => {}
        }
        cfg
    }

    /// Parses TOML; fields the file omits take the scenario's defaults.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: serde_json::Value = toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        Self::from_partial(raw)
    }

    /// Parses JSON; fields the file omits take the scenario's defaults.
    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_partial(serde_json::from_str(s)?)
    }

    fn from_partial(raw: serde_json::Value) -> Result<Self> {
        let scenario: Scenario = raw
            .get("scenario")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Config("config needs a `scenario`".into()))?
            .parse()?;
        let mut merged = serde_json::to_value(Self::default_for(scenario))?;
        merge(&mut merged, raw);
        let cfg: Self = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `.json` files as JSON and everything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn type_index(&self) -> Result<TypeMultiIndex> {
        TypeMultiIndex::new(self.alpha.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn quad(&self) -> QuadConfig {
        QuadConfig::with_rel_tol(self.quad_rel_tol)
    }

    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    pub fn num(&self, name: &str, default: f64) -> f64 {
        match self.params.get(name) {
            Some(Param::Num(v)) => *v,
            _ => default,
        }
    }

    pub fn list(&self, name: &str, default: &[f64]) -> Vec<f64> {
        match self.params.get(name) {
            Some(Param::List(v)) => v.clone(),
            Some(Param::Num(v)) => vec![*v],
            None => default.to_vec(),
        }
    }

    /// Checks everything a run needs before any output is produced.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return config_error(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let alpha = self.type_index()?;
        self.time_grid.validate()?;
        let l = &self.lambdas;
        if !(l.lo > 0.0 && l.hi > l.lo && l.hi.is_finite() && l.per_decade > 0) {
            return config_error("λ sweep needs 0 < lo < hi < ∞ and per_decade > 0");
        }
        if self.budget.mc_samples == 0 {
            return config_error("budget.mc_samples must be positive");
        }
        if let Some(s) = self.budget.max_seconds {
            if !(s > 0.0) {
                return config_error("budget.max_seconds must be positive");
            }
        }
        if !(self.quad_rel_tol > 0.0 && self.quad_rel_tol < 1e-2) {
            return config_error("quad_rel_tol must lie in (0, 1e-2)");
        }
        if !(self.min_tol >= 0.0 && self.min_tol < 1.0) {
            return config_error("min_tol must lie in [0, 1)");
        }
        if self.x_probes.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return config_error("x_probes must be positive and finite");
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(**v > 0.0)) {
            return config_error(format!("tolerance `{k}` must be positive, got {v}"));
        }
        let min = alpha.min();
        let d = alpha.dim();
        let uniform = alpha.min_multiplicity(self.min_tol) == d;
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { config_error(format!("{}: {what}", self.scenario)) };
        match self.scenario {
            Scenario::Orthonormality | Scenario::EigenDecay | Scenario::ChapmanKolmogorov => {
                need(d == 1, "alpha must be one-dimensional")
            }
            Scenario::EnvelopeSandwich => need(d == 1, "alpha must be one-dimensional"),
            Scenario::Proposition1d | Scenario::WeakType1d => {
                need(d == 1 && min < 0.0, "alpha must be a single type in (-1, 0)")
            }
            Scenario::LevelsetLemma => need(d <= 4, "dimension at most 4"),
            Scenario::SharpnessCube | Scenario::LogEndpointD2 => {
                need(d == 2 && uniform && min < 0.0, "alpha must be (a, a) with a in (-1, 0)")
            }
            Scenario::CounterexampleGrowth => {
                need(d == 4 && uniform && min < 0.0, "alpha must be (a, a, a, a) with a in (-1, 0)")
            }
            Scenario::P0Endpoint => need((2..=3).contains(&d) && uniform && min < 0.0, "alpha must be uniform negative in d = 2, 3"),
            Scenario::P0Witness => need(d >= 2 && uniform && min < 0.0, "alpha must be uniform negative with d >= 2"),
        }
    }
}

fn config_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
