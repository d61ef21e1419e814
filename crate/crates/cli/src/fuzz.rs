//! `fuzz` and `replay`.
//!
//! An optional fuzz config file sets the grid and any default flag:
//!
//! ```toml
//! trials = 100000
//! tmax = 64
//! d = 1
//! seed = 0
//!
//! [[grid]]
//! beta1 = 0.9
//! beta2 = 0.999
//! lambda = 0.999
//! ```
//!
//! Without a config file the built-in grid is used.

use std::path::{Path, PathBuf};

use adam_regret::analysis::fuzz::{
    default_grid, run_fuzz, synthetic_violation, Counterexample, FuzzConfig, FuzzSummary, Replay,
};
use adam_regret::HyperParams;
use serde::Deserialize;

use crate::error::{CliError, CliResult, EXIT_VIOLATION};
use crate::Artifacts;

pub const DEFAULT_TRIALS: usize = 10_000;
pub const DEFAULT_TMAX: usize = 64;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridEntry {
    beta1: f64,
    beta2: f64,
    lambda: f64,
    #[serde(default)]
    eta: Option<f64>,
    #[serde(default)]
    epsilon: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FuzzFile {
    #[serde(default)]
    trials: Option<usize>,
    #[serde(default)]
    tmax: Option<usize>,
    #[serde(default)]
    d: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    g_inf: Option<f64>,
    #[serde(default)]
    grid: Vec<GridEntry>,
}

/// Command-line overrides; `None` keeps the file value or the default.
#[derive(Debug, Clone, Default)]
pub struct FuzzOverrides {
    pub trials: Option<usize>,
    pub tmax: Option<usize>,
    pub d: Option<usize>,
    pub seed: Option<u64>,
}

/// Builds the search configuration. Grid entries are validated here, so
/// an entry with `gamma >= 1` is a config error.
pub fn load_fuzz_config(path: Option<&Path>, o: &FuzzOverrides) -> CliResult<FuzzConfig> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str::<FuzzFile>(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => FuzzFile {
            trials: None,
            tmax: None,
            d: None,
            seed: None,
            g_inf: None,
            grid: Vec::new(),
        },
    };
    let grid = if file.grid.is_empty() {
        default_grid()
    } else {
        let mut grid = Vec::with_capacity(file.grid.len());
        for (k, g) in file.grid.iter().enumerate() {
            let base = HyperParams::default();
            let p = HyperParams {
                eta: g.eta.unwrap_or(base.eta),
                beta1: g.beta1,
                beta2: g.beta2,
                lambda: g.lambda,
                epsilon: g.epsilon.unwrap_or(base.epsilon),
                alpha: base.alpha,
            };
            p.validate()
                .map_err(|e| CliError::Config(format!("grid entry {k}: {e}")))?;
            grid.push(p);
        }
        grid
    };
    let mut cfg = FuzzConfig::new(
        o.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS),
        o.tmax.or(file.tmax).unwrap_or(DEFAULT_TMAX),
        o.d.or(file.d).unwrap_or(1),
        grid,
        o.seed.or(file.seed).unwrap_or(0),
    );
    if let Some(g) = file.g_inf {
        if !(g > 0.0 && g.is_finite()) {
            return Err(CliError::Config(format!("g_inf = {g} must be positive")));
        }
        cfg.g_inf = g;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct FuzzOutcome {
    pub summary: FuzzSummary,
    /// 0, or [`EXIT_VIOLATION`] when a violation was confirmed.
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
}

fn record_name(c: &Counterexample, k: usize) -> String {
    match c.trial {
        Some(t) => format!("trial_{t:07}.toml"),
        None => format!("injected_{k:03}.toml"),
    }
}

/// Runs the search and writes `fuzz_summary.txt`, `closest.toml` (the
/// trial with the smallest relative slack) and one file per confirmed
/// violation under `counterexamples/`.
pub fn cmd_fuzz(cfg: &FuzzConfig, inject_violation: bool, out_dir: &Path) -> CliResult<FuzzOutcome> {
    let injected = if inject_violation {
        vec![synthetic_violation()]
    } else {
        Vec::new()
    };
    let summary = run_fuzz(cfg, &injected)?;

    let mut files = Artifacts::default();
    files.add("fuzz_summary.txt", summary.to_text().into_bytes());
    if let Some(a) = &summary.argmin {
        files.add("closest.toml", a.to_text().into_bytes());
    }
    let mut injected_seen = 0;
    for v in &summary.violations {
        let name = record_name(v, injected_seen);
        if v.trial.is_none() {
            injected_seen += 1;
        }
        files.add(Path::new("counterexamples").join(name), v.to_text().into_bytes());
    }
    let mut written = files.write_all(out_dir)?;
    let dir = out_dir.join("counterexamples");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    written.sort();
    let exit_code = if summary.violations.is_empty() {
        0
    } else {
        EXIT_VIOLATION
    };
    Ok(FuzzOutcome {
        summary,
        exit_code,
        files: written,
    })
}

/// Re-evaluates a serialized record.
pub fn cmd_replay(path: &Path) -> CliResult<(Counterexample, Replay)> {
    let rec = Counterexample::read_from(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let replay = rec.replay();
    Ok((rec, replay))
}
