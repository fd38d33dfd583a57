//! Experiment configuration files (TOML).
//!
//! ```toml
//! [problem]
//! name = "trap"          # synthetic: sphere | ellipsoid | rastrigin | trap
//! n_vars = 5
//! # command = "./simulate {input}"   # external problem instead of `name`
//! # bounds = [[0.0, 1.0], [0.0, 1.0]]
//! # timeout_ms = 60000
//! # direction = "maximize"
//!
//! [grid]
//! levels = 8
//!
//! [experiment]
//! trials = 10
//! budget = 100
//! seed = 0
//! baseline = "uniform"
//!
//! [[method]]
//! label = "uniform"
//! design = "uniform"     # uniform | lhs | sobol | random
//! n0 = 8
//!
//! [train]                # optional, defaults shown by `TrainConfig::default`
//! [anneal]               # optional, defaults shown by `AnnealConfig::default`
//! ```

use std::collections::HashSet;
use std::path::Path;

use anyhow::{bail, Context};
use fmqa::annealer::AnnealConfig;
use fmqa::blackbox::{external_adapter, BlackBoxProblem, Direction, SyntheticFunction};
use fmqa::encoding::DiscretizationGrid;
use fmqa::initdesign::DesignMethod;
use fmqa::surrogate::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    pub experiment: ExperimentSettings,
    #[serde(rename = "method")]
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub anneal: AnnealConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: Option<String>,
    pub n_vars: Option<usize>,
    pub command: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub direction: Direction,
    pub bounds: Option<Vec<[f64; 2]>>,
}

fn default_timeout_ms() -> u64 {
    60_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSettings {
    pub trials: usize,
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    /// Label of the method the others are compared against.
    pub baseline: Option<String>,
    /// FM factor rank.
    #[serde(default = "default_rank")]
    pub rank: usize,
    #[serde(default = "default_true")]
    pub scale_qubo: bool,
    /// Worker threads for trials; 1 when unset.
    pub parallel: Option<usize>,
}

fn default_rank() -> usize {
    5
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Uniform,
    Lhs,
    Sobol,
    Random,
}

impl MethodKind {
    pub fn design(self) -> Option<DesignMethod> {
        match self {
            MethodKind::Uniform => Some(DesignMethod::Uniform),
            MethodKind::Lhs => Some(DesignMethod::Lhs),
            MethodKind::Sobol => Some(DesignMethod::Sobol),
            MethodKind::Random => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub label: String,
    pub design: MethodKind,
    /// Initial design size; for `random` only the reported initial phase.
    pub n0: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let e = &self.experiment;
        if e.trials == 0 {
            bail!("experiment.trials: must be at least 1");
        }
        if e.budget == 0 {
            bail!("experiment.budget: must be positive");
        }
        if e.rank == 0 {
            bail!("experiment.rank: must be positive");
        }
        if e.parallel == Some(0) {
            bail!("experiment.parallel: must be positive");
        }
        if self.grid.levels < 2 {
            bail!("grid.levels: need at least 2 levels");
        }
        if self.methods.is_empty() {
            bail!("method: at least one [[method]] entry is required");
        }
        let mut labels = HashSet::new();
        for (i, m) in self.methods.iter().enumerate() {
            if m.label.is_empty() || m.label.contains(['/', '\\']) {
                bail!("method[{i}].label: must be non-empty and contain no path separators");
            }
            if !labels.insert(m.label.as_str()) {
                bail!("method[{i}].label: duplicate label {:?}", m.label);
            }
            if m.n0 == 0 {
                bail!("method[{i}].n0: must be positive");
            }
            if m.design != MethodKind::Random && m.n0 >= e.budget {
                bail!("method[{i}].n0: must be below experiment.budget ({})", e.budget);
            }
        }
        if let Some(b) = &e.baseline {
            if !labels.contains(b.as_str()) {
                bail!("experiment.baseline: no method labelled {b:?}");
            }
        }
        self.train.validate().context("train")?;
        self.anneal.validate().context("anneal")?;
        if self.anneal.time_budget_ms.is_some() {
            log::warn!("anneal.time_budget_ms is set: results depend on machine speed");
        }
        let p = &self.problem;
        match (&p.name, &p.command) {
            (Some(_), Some(_)) => bail!("problem: give either name or command, not both"),
            (None, None) => bail!("problem: name or command is required"),
            (Some(name), None) => {
                if SyntheticFunction::from_name(name).is_none() {
                    bail!("problem.name: unknown synthetic problem {name:?}");
                }
                if p.n_vars.unwrap_or(0) == 0 {
                    bail!("problem.n_vars: required and positive for synthetic problems");
                }
                if p.bounds.is_some() {
                    bail!("problem.bounds: only valid with an external command");
                }
            }
            (None, Some(_)) => {
                let Some(bounds) = &p.bounds else {
                    bail!("problem.bounds: required for an external command");
                };
                if bounds.is_empty() {
                    bail!("problem.bounds: must list at least one variable");
                }
                if p.n_vars.is_some_and(|n| n != bounds.len()) {
                    bail!("problem.n_vars: does not match the number of bounds");
                }
            }
        }
        let (problem, grid) = self.build()?;
        if let Some(total) = grid.total_points() {
            if e.budget as u128 > total {
                bail!("experiment.budget: exceeds the {total} grid points");
            }
        }
        drop(problem);
        Ok(())
    }

    /// Problem and grid described by the config.
    pub fn build(&self) -> anyhow::Result<(BlackBoxProblem, DiscretizationGrid)> {
        let p = &self.problem;
        let problem = if let Some(name) = &p.name {
            let f = SyntheticFunction::from_name(name)
                .with_context(|| format!("unknown synthetic problem {name:?}"))?;
            f.problem(p.n_vars.unwrap_or(0))
        } else {
            let command = p.command.clone().context("problem.command missing")?;
            let bounds = p.bounds.clone().unwrap_or_default().into_iter().map(|[a, b]| (a, b)).collect();
            external_adapter("external", command, bounds, p.direction, p.timeout_ms)
                .context("problem")?
        };
        let grid = problem.grid(self.grid.levels).context("grid")?;
        Ok((problem, grid))
    }

    pub fn baseline(&self) -> Option<&str> {
        self.experiment.baseline.as_deref()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        fmqa::optimizer::config_hash(self)
    }
}
