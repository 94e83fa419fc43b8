//! Experiment configuration.
//!
//! Configs are TOML files. Any field can be overridden from the command line
//! by its dotted path (`solver.lambda=0.5`); overrides are applied to the
//! parsed document before it is deserialized, so they go through the same
//! validation as file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sdmgrad_core::optimizers::{LearningRateSchedule, OptimizerKind, OuterOptimizer};
use sdmgrad_core::problems::TOY_INITIALIZATIONS;
use sdmgrad_core::{Method, NoiseSpec, QuadraticProblem, SolverConfig, ToyProblem};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid override `{0}`: expected <path>=<value>")]
    Override(String),
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub method: String,
    pub solver: SolverSection,
    pub noise: NoiseSection,
    pub optimizer: OptimizerSection,
    /// Outer steps `T`.
    pub steps: usize,
    pub repeats: usize,
    /// Repeat `r` uses `seed + r` for both the noise and the solver streams.
    pub seed: u64,
    pub output: PathBuf,
    pub record_every: usize,
    pub record_theta: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::default(),
            method: "sdmgrad".into(),
            solver: SolverSection {
                alpha: 0.002,
                ..SolverSection::default()
            },
            noise: NoiseSection { sigma: 0.1 },
            optimizer: OptimizerSection::default(),
            steps: 70_000,
            repeats: 3,
            seed: 0,
            output: PathBuf::from("runs"),
            record_every: 100,
            record_theta: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Toy {
        /// Starting points; every start is run `repeats` times.
        #[serde(default = "toy_starts")]
        starts: Vec<[f64; 2]>,
    },
    Quadratic {
        k: usize,
        m: usize,
        #[serde(default)]
        seed: u64,
        /// Use `A_i = I` instead of random diagonal curvature.
        #[serde(default)]
        identity: bool,
        /// Explicit centers (implies `A_i = I`); overrides `k`/`m`/`seed`.
        #[serde(default)]
        centers: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        starts: Option<Vec<Vec<f64>>>,
        /// Fill value for the default start when `starts` is absent.
        #[serde(default = "default_fill")]
        start_value: f64,
    },
}

fn toy_starts() -> Vec<[f64; 2]> {
    TOY_INITIALIZATIONS.to_vec()
}

fn default_fill() -> f64 {
    3.0
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig::Toy {
            starts: toy_starts(),
        }
    }
}

/// A problem instance built from its config.
pub enum BuiltProblem {
    Toy(ToyProblem),
    Quadratic(QuadraticProblem),
}

impl BuiltProblem {
    pub fn as_dyn(&self) -> &dyn sdmgrad_core::Problem {
        match self {
            BuiltProblem::Toy(p) => p,
            BuiltProblem::Quadratic(p) => p,
        }
    }
}

impl ProblemConfig {
    pub fn build(&self) -> Result<BuiltProblem, ConfigError> {
        match self {
            ProblemConfig::Toy { .. } => Ok(BuiltProblem::Toy(ToyProblem)),
            ProblemConfig::Quadratic {
                k,
                m,
                seed,
                identity,
                centers,
                ..
            } => {
                let problem = match centers {
                    Some(c) => QuadraticProblem::identity(c.clone()),
                    None if *identity => sdmgrad_core::quadratic_problem(*k, *m, *seed)
                        .and_then(|p| QuadraticProblem::identity(p.centers().to_vec())),
                    None => sdmgrad_core::quadratic_problem(*k, *m, *seed),
                };
                problem
                    .map(BuiltProblem::Quadratic)
                    .map_err(|e| invalid("problem", e.to_string()))
            }
        }
    }

    pub fn starts(&self) -> Vec<Vec<f64>> {
        match self {
            ProblemConfig::Toy { starts } => starts.iter().map(|s| s.to_vec()).collect(),
            ProblemConfig::Quadratic {
                m,
                centers,
                starts,
                start_value,
                ..
            } => match starts {
                Some(s) => s.clone(),
                None => {
                    let m = centers
                        .as_ref()
                        .and_then(|c| c.first())
                        .map_or(*m, Vec::len);
                    vec![vec![*start_value; m]]
                }
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemConfig::Toy { .. } => "toy",
            ProblemConfig::Quadratic { .. } => "quadratic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub lambda: f64,
    pub rho: f64,
    pub beta: f64,
    pub inner_steps: usize,
    pub inner_momentum: f64,
    pub alpha: f64,
    pub sample_count: Option<usize>,
    pub objective_scale: f64,
    pub cagrad_c: f64,
    pub baseline_steps: usize,
    pub initial_weights: Option<Vec<f64>>,
    pub target_weights: Option<Vec<f64>>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            lambda: d.lambda,
            rho: d.rho,
            beta: d.beta,
            inner_steps: d.inner_steps,
            inner_momentum: d.inner_momentum,
            alpha: d.alpha,
            sample_count: d.sample_count,
            objective_scale: d.objective_scale,
            cagrad_c: d.cagrad_c,
            baseline_steps: d.baseline_steps,
            initial_weights: d.initial_weights,
            target_weights: d.target_weights,
        }
    }
}

impl SolverSection {
    pub fn to_core(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            rho: self.rho,
            beta: self.beta,
            inner_steps: self.inner_steps,
            inner_momentum: self.inner_momentum,
            alpha: self.alpha,
            sample_count: self.sample_count,
            seed,
            objective_scale: self.objective_scale,
            cagrad_c: self.cagrad_c,
            baseline_steps: self.baseline_steps,
            initial_weights: self.initial_weights.clone(),
            target_weights: self.target_weights.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    Plain,
    Momentum,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub kind: OptimizerName,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// `(step, factor)` pairs for multi-step decay.
    pub milestones: Vec<(usize, f64)>,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            kind: OptimizerName::Adam,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            milestones: Vec::new(),
        }
    }
}

impl OptimizerSection {
    pub fn to_core(&self) -> OuterOptimizer {
        let kind = match self.kind {
            OptimizerName::Plain => OptimizerKind::Plain,
            OptimizerName::Momentum => OptimizerKind::Momentum {
                momentum: self.momentum,
            },
            OptimizerName::Adam => OptimizerKind::Adam {
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
        };
        OuterOptimizer {
            kind,
            schedule: LearningRateSchedule {
                milestones: self.milestones.clone(),
            },
        }
    }
}

impl ExperimentConfig {
    /// Loads `path` (or the defaults when `None`) and applies dotted-path
    /// overrides such as `("solver.lambda", "0.5")`.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut doc: toml::Table = if text.trim().is_empty() {
            toml::Table::try_from(Self::default()).map_err(|e| ConfigError::Parse(e.to_string()))?
        } else {
            text.parse()
                .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?
        };
        for (path, raw) in overrides {
            apply_override(&mut doc, path, raw)?;
        }
        let cfg: Self = doc
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn method(&self) -> Result<Method, ConfigError> {
        self.method
            .parse()
            .map_err(|_| invalid("method", format!("unknown method `{}`", self.method)))
    }

    pub fn noise(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            sigma: self.noise.sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.method()?;
        if self.repeats == 0 {
            return Err(invalid("repeats", "must be >= 1"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be >= 1"));
        }
        NoiseSpec::new(self.noise.sigma, 0).map_err(|e| invalid("noise.sigma", e.to_string()))?;
        let problem = self.problem.build()?;
        let desc = problem.as_dyn().descriptor();
        self.solver
            .to_core(0)
            .validate(desc.k)
            .map_err(|e| match e {
                sdmgrad_core::Error::InvalidConfig { field, reason } => {
                    invalid(format!("solver.{field}"), reason)
                }
                other => invalid("solver", other.to_string()),
            })?;
        let outer = self.optimizer.to_core();
        outer
            .kind
            .validate()
            .and_then(|_| outer.schedule.validate())
            .map_err(|e| match e {
                sdmgrad_core::Error::InvalidConfig { field, reason } => invalid(field, reason),
                other => invalid("optimizer", other.to_string()),
            })?;
        for (i, s) in self.problem.starts().iter().enumerate() {
            if s.len() != desc.m {
                return Err(invalid(
                    format!("problem.starts[{i}]"),
                    format!("expected {} entries, got {}", desc.m, s.len()),
                ));
            }
        }
        if self.problem.starts().is_empty() {
            return Err(invalid("problem.starts", "at least one start is required"));
        }
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(doc: &mut toml::Table, path: &str, raw: &str) -> Result<(), ConfigError> {
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| ConfigError::Override(path.into()))?;
    let mut table = doc;
    for key in keys {
        let entry = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(path.into()))?;
    }
    let mut value = parse_value(raw);
    // Float fields accept integer literals on the command line (`--solver.lambda 1`).
    if let (Some(toml::Value::Float(_)), toml::Value::Integer(i)) = (table.get(last), &value) {
        value = toml::Value::Float(*i as f64);
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Splits `key=value` into an override pair.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| ConfigError::Override(s.to_string()))
}
