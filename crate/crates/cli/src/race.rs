//! `race`: several optimizers on the same problem, recorded as training curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use adam_regret::fmt::num;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::run::optimizer_path;
use crate::Artifacts;

pub const RACE_CSV_HEADER: &str = "step,optimizer,objective_value";

#[derive(Debug, Clone, PartialEq)]
pub struct RaceSummary {
    /// `(label, e_T(w_T))` per member, in config order.
    pub finals: Vec<(String, f64)>,
    pub files: Vec<PathBuf>,
}

/// Runs every member for the shared `T` and writes `race.csv`, with the
/// objective evaluated at each step's updated point.
pub fn cmd_race(configs: &[RunConfig], out_dir: &Path) -> CliResult<RaceSummary> {
    if configs.len() < 2 {
        return Err(CliError::Config(format!(
            "race needs at least 2 configs, got {}",
            configs.len()
        )));
    }
    let first = &configs[0];
    for c in &configs[1..] {
        if c.problem != first.problem {
            return Err(CliError::Config(format!(
                "race members use different problems ({} vs {})",
                first.problem_spec.display(),
                c.problem_spec.display()
            )));
        }
        if c.horizon != first.horizon {
            return Err(CliError::Config(format!(
                "race members use different T ({} vs {})",
                first.horizon, c.horizon
            )));
        }
    }
    let problem = first.build_problem()?;

    let curves: Vec<Vec<f64>> = configs
        .par_iter()
        .map(|cfg| {
            optimizer_path(cfg, &problem)?
                .iter()
                .map(|r| problem.value(&r.w_after, r.t).map_err(CliError::from))
                .collect()
        })
        .collect::<CliResult<_>>()?;

    let mut csv = String::new();
    csv.push_str(RACE_CSV_HEADER);
    csv.push('\n');
    let mut finals = Vec::with_capacity(configs.len());
    for (cfg, curve) in configs.iter().zip(&curves) {
        let label = cfg.label();
        for (k, value) in curve.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{}", k + 1, label, num(*value));
        }
        finals.push((label, *curve.last().expect("T >= 1")));
    }
    let mut files = Artifacts::default();
    files.add("race.csv", csv.into_bytes());
    Ok(RaceSummary {
        finals,
        files: files.write_all(out_dir)?,
    })
}
