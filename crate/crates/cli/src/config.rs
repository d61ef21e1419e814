//! Run configuration files.
//!
//! ```toml
//! problem_spec = "problem.toml"   # relative to this file
//! optimizer = "adam"              # gd | momentum | adam
//! T = 1000
//! T_schedule = [100, 316, 1000]   # optional, adam only
//! seed = 7                        # optional, overrides the problem seed
//! output_dir = "out"              # relative to this file
//! name = "adam-fast"              # optional label used by race
//! w0 = [0.0, 0.0]                 # optional, defaults to the origin
//!
//! [params]                        # any omitted key keeps its default
//! eta = 0.01
//! beta1 = 0.9
//! beta2 = 0.999
//! lambda = 0.999
//! epsilon = 1e-8
//! alpha = 0.9
//! ```

use std::path::{Path, PathBuf};

use adam_regret::{ConvexProblem, HyperParams, ProblemSpec};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Gd,
    Momentum,
    Adam,
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Gd => "gd",
            OptimizerKind::Momentum => "momentum",
            OptimizerKind::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem_spec: PathBuf,
    optimizer: OptimizerKind,
    #[serde(default)]
    params: HyperParams,
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(rename = "T_schedule", default)]
    schedule: Option<Vec<usize>>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default = "default_output")]
    output_dir: PathBuf,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    w0: Option<Vec<f64>>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem_spec: PathBuf,
    /// Loaded problem spec with the effective seed applied.
    pub problem: ProblemSpec,
    pub optimizer: OptimizerKind,
    pub params: HyperParams,
    pub horizon: usize,
    pub schedule: Option<Vec<usize>>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub name: Option<String>,
    pub w0: Option<Vec<f64>>,
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

impl RunConfig {
    /// Loads a config file and the problem spec it points to.
    pub fn load(path: &Path) -> CliResult<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let raw: RawConfig =
            toml::from_str(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let spec_path = base.join(&raw.problem_spec);
        let mut problem = ProblemSpec::parse(&read(&spec_path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", spec_path.display())))?;
        let seed = raw.seed.unwrap_or(problem.seed);
        problem.seed = seed;
        let cfg = RunConfig {
            problem_spec: spec_path,
            problem,
            optimizer: raw.optimizer,
            params: raw.params,
            horizon: raw.horizon,
            schedule: raw.schedule,
            seed,
            output_dir: base.join(raw.output_dir),
            name: raw.name,
            w0: raw.w0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the seed, for `--seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.problem.seed = seed;
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.horizon == 0 {
            return Err(CliError::Config("T must be at least 1".into()));
        }
        if let Some(s) = &self.schedule {
            if s.len() < 3 || s[0] == 0 || s.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::Config(
                    "T_schedule must list at least 3 strictly increasing positive horizons".into(),
                ));
            }
            if self.optimizer != OptimizerKind::Adam {
                return Err(CliError::Config(
                    "T_schedule is only supported for optimizer = \"adam\"".into(),
                ));
            }
        }
        if let Some(w0) = &self.w0 {
            if w0.len() != self.problem.d {
                return Err(CliError::Config(format!(
                    "w0 has {} entries but the problem has d = {}",
                    w0.len(),
                    self.problem.d
                )));
            }
        }
        self.params.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    /// Display label: `name` if given, else the optimizer.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.optimizer.name().to_string())
    }

    pub fn build_problem(&self) -> CliResult<ConvexProblem> {
        Ok(ConvexProblem::from_spec(&self.problem)?)
    }

    pub fn initial_point(&self) -> Vec<f64> {
        self.w0.clone().unwrap_or_else(|| vec![0.0; self.problem.d])
    }
}
