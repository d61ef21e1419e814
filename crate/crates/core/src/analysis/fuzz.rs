//! Randomized counterexample search for the moment-ratio inequality.
//!
//! Trial `k` draws everything from the sub-stream `derive_seed(seed, k)`,
//! uses grid entry `k % grid.len()`, picks one of four sequence families,
//! a length in `1..=t_max`, and a `length x d` gradient matrix with entries
//! bounded by `g_inf`. Trials run in parallel; aggregation happens in trial
//! order afterwards, so the summary is independent of scheduling.
//!
//! Near-misses are re-evaluated at extended precision by
//! [`conjecture_sides`]. Confirmed violations are kept as
//! [`Counterexample`] records that serialize to a replayable TOML file.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::analysis::conjecture::{conjecture_sides, ConjectureReport, Escalation};
use crate::error::{Error, Result};
use crate::fmt::num;
use crate::params::HyperParams;
use crate::rng::{derive_seed, seeded_rng, SeededRng};
use crate::trajectory::GradSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// i.i.d. uniform on `[-G, G]`
    Uniform,
    /// normal with standard deviation `G/2`, clipped to `[-G, G]`
    ClippedGaussian,
    /// zero runs of random length between short uniform bursts
    SparseRuns,
    /// runs of tiny gradients followed by full-size same-sign spikes
    Adversarial,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Uniform,
        Family::ClippedGaussian,
        Family::SparseRuns,
        Family::Adversarial,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::ClippedGaussian => "clipped-gaussian",
            Family::SparseRuns => "sparse-runs",
            Family::Adversarial => "adversarial",
        }
    }

    fn index(&self) -> usize {
        Family::ALL.iter().position(|f| f == self).unwrap()
    }

    fn from_name(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == s)
    }

    /// One gradient column of length `len` with entries in `[-g, g]`.
    pub fn column(&self, rng: &mut SeededRng, len: usize, g: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(len + 4);
        match self {
            Family::Uniform => out.extend((0..len).map(|_| rng.uniform(-g, g))),
            Family::ClippedGaussian => out.extend((0..len).map(|_| (0.5 * g * rng.standard_normal()).clamp(-g, g))),
            Family::SparseRuns => {
                while out.len() < len {
                    let zeros = rng.below(len as u64 / 2 + 1) as usize;
                    out.extend(std::iter::repeat_n(0.0, zeros));
                    let active = 1 + rng.below(4) as usize;
                    for _ in 0..active {
                        out.push(rng.uniform(-g, g));
                    }
                }
            }
            Family::Adversarial => {
                let tiny = g * 10f64.powi(-(2 + rng.below(7) as i32));
                let mut sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
                while out.len() < len {
                    let quiet = rng.below(len as u64) as usize;
                    for _ in 0..quiet {
                        let s = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
                        out.push(s * tiny * rng.uniform(0.5, 1.0));
                    }
                    if rng.bernoulli(0.3) {
                        sign = -sign;
                    }
                    let burst = 1 + rng.below(3) as usize;
                    out.extend(std::iter::repeat_n(sign * g, burst));
                }
            }
        }
        out.truncate(len);
        out
    }
}

/// A `(beta1, beta2, lambda)` grid with `gamma < 1` everywhere.
pub fn default_grid() -> Vec<HyperParams> {
    [
        (0.9, 0.999, 0.999),
        (0.9, 0.999, 0.5),
        (0.9, 0.99, 0.999),
        (0.95, 0.9999, 0.999),
        (0.8, 0.9, 0.99),
        (0.7, 0.3, 0.9),
        (0.5, 0.9, 0.9),
        (0.5, 0.5, 0.999),
        (0.3, 0.1, 0.5),
        (0.1, 0.01, 0.1),
    ]
    .into_iter()
    .map(|(b1, b2, lam)| HyperParams::new(0.001, b1, b2, lam, 1e-8).expect("grid entry is valid"))
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzConfig {
    pub n_trials: usize,
    pub t_max: usize,
    pub d: usize,
    pub grid: Vec<HyperParams>,
    pub seed: u64,
    /// Entry bound `G_inf` of generated sequences.
    pub g_inf: f64,
}

impl FuzzConfig {
    pub fn new(n_trials: usize, t_max: usize, d: usize, grid: Vec<HyperParams>, seed: u64) -> Self {
        Self {
            n_trials,
            t_max,
            d,
            grid,
            seed,
            g_inf: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 || self.d == 0 {
            return Err(Error::InvalidParams("t_max and d must be positive".into()));
        }
        if self.n_trials > 0 && self.grid.is_empty() {
            return Err(Error::InvalidParams("parameter grid is empty".into()));
        }
        for (k, p) in self.grid.iter().enumerate() {
            p.check_gamma()
                .map_err(|e| Error::InvalidParams(format!("grid entry {k}: {e}")))?;
        }
        Ok(())
    }
}

/// A sequence to test, with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// `None` for injected candidates.
    pub trial: Option<usize>,
    pub family: Option<Family>,
    pub params: HyperParams,
    pub seq: GradSequence,
}

/// Regenerates the candidate of trial `trial`.
pub fn generate_candidate(cfg: &FuzzConfig, trial: usize) -> Candidate {
    let mut rng = seeded_rng(derive_seed(cfg.seed, trial as u64));
    let params = cfg.grid[trial % cfg.grid.len()];
    let family = Family::ALL[rng.below(4) as usize];
    let len = 1 + rng.below(cfg.t_max as u64) as usize;
    let columns: Vec<Vec<f64>> = (0..cfg.d).map(|_| family.column(&mut rng, len, cfg.g_inf)).collect();
    let rows = (0..len).map(|t| columns.iter().map(|c| c[t]).collect()).collect();
    Candidate {
        trial: Some(trial),
        family: Some(family),
        params,
        seq: GradSequence::new(cfg.d, rows, cfg.g_inf).expect("generated entries respect the cap"),
    }
}

/// A fixed record with `gamma > 1` (`beta1 = 0.99`, `beta2 = 0.5`), whose
/// right side is negative. Used to check that the pipeline detects,
/// serializes and replays a violation.
pub fn synthetic_violation() -> Candidate {
    let params = HyperParams {
        beta1: 0.99,
        beta2: 0.5,
        ..HyperParams::default()
    };
    Candidate {
        trial: None,
        family: None,
        params,
        seq: GradSequence::scalar(vec![1.0, -0.5, 0.25, 1.0], 1.0).expect("entries within cap"),
    }
}

/// A serialized instance with both sides recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub trial: Option<usize>,
    pub family: Option<Family>,
    pub params: HyperParams,
    pub seq: GradSequence,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub slack: f64,
}

/// Result of re-evaluating a stored record.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub recorded_slack: f64,
    pub replayed_slack: f64,
    pub relative_error: f64,
    pub violated: bool,
}

fn toml_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        num(x)
    }
}

fn toml_list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|&x| toml_num(x)).collect();
    format!("[{}]", items.join(", "))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordFile {
    trial: Option<usize>,
    family: String,
    #[serde(rename = "T")]
    horizon: usize,
    d: usize,
    g_inf_cap: f64,
    params: HyperParams,
    sides: SidesFile,
    gradients: GradientsFile,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SidesFile {
    lhs: Vec<f64>,
    rhs: Vec<f64>,
    slack: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GradientsFile {
    g: Vec<Vec<f64>>,
}

impl Counterexample {
    pub fn from_report(candidate: &Candidate, report: &ConjectureReport) -> Self {
        Self {
            trial: candidate.trial,
            family: candidate.family,
            params: candidate.params,
            seq: candidate.seq.clone(),
            lhs: report.lhs.clone(),
            rhs: report.rhs.clone(),
            slack: report.min_slack,
        }
    }

    pub fn family_label(&self) -> &'static str {
        self.family.map_or("injected", |f| f.name())
    }

    /// TOML text with every float at 17 significant digits.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        s.push_str("# moment-ratio inequality record; replay with `adam-regret replay --file <this file>`\n");
        if let Some(t) = self.trial {
            let _ = writeln!(s, "trial = {t}");
        }
        let _ = writeln!(s, "family = \"{}\"", self.family_label());
        let _ = writeln!(s, "T = {}", self.seq.len());
        let _ = writeln!(s, "d = {}", self.seq.dim());
        let _ = writeln!(s, "g_inf_cap = {}", toml_num(self.seq.g_inf_cap()));
        s.push_str("\n[params]\n");
        for (k, v) in [
            ("eta", p.eta),
            ("beta1", p.beta1),
            ("beta2", p.beta2),
            ("lambda", p.lambda),
            ("epsilon", p.epsilon),
            ("alpha", p.alpha),
        ] {
            let _ = writeln!(s, "{k} = {}", toml_num(v));
        }
        s.push_str("\n[sides]\n");
        let _ = writeln!(s, "lhs = {}", toml_list(&self.lhs));
        let _ = writeln!(s, "rhs = {}", toml_list(&self.rhs));
        let _ = writeln!(s, "slack = {}", toml_num(self.slack));
        s.push_str("\n[gradients]\ng = [\n");
        for row in self.seq.rows() {
            let _ = writeln!(s, "  {},", toml_list(row));
        }
        s.push_str("]\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: RecordFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if f.gradients.g.len() != f.horizon {
            return Err(Error::Parse(format!(
                "T = {} but {} gradient rows",
                f.horizon,
                f.gradients.g.len()
            )));
        }
        let family = match f.family.as_str() {
            "injected" => None,
            name => Some(Family::from_name(name).ok_or_else(|| Error::Parse(format!("unknown family {name}")))?),
        };
        Ok(Self {
            trial: f.trial,
            family,
            params: f.params,
            seq: GradSequence::new(f.d, f.gradients.g, f.g_inf_cap)?,
            lhs: f.sides.lhs,
            rhs: f.sides.rhs,
            slack: f.sides.slack,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Recomputes both sides from the stored sequence and parameters.
    pub fn replay(&self) -> Replay {
        let report = conjecture_sides(&self.seq, &self.params);
        let relative_error = if report.min_slack == self.slack {
            0.0
        } else {
            (report.min_slack - self.slack).abs() / self.slack.abs().max(f64::MIN_POSITIVE)
        };
        Replay {
            recorded_slack: self.slack,
            replayed_slack: report.min_slack,
            relative_error,
            violated: report.violated,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscalationLog {
    pub trial: Option<usize>,
    pub family: Option<Family>,
    pub escalation: Escalation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzSummary {
    pub config: FuzzConfig,
    pub trials: usize,
    pub injected: usize,
    /// Smallest absolute slack over generated trials; `+inf` if none ran.
    pub min_slack: f64,
    /// Smallest `slack / rhs` over generated trials; `+inf` if none ran.
    pub min_relative_slack: f64,
    /// The generated trial attaining `min_relative_slack`.
    pub argmin: Option<Counterexample>,
    pub violations: Vec<Counterexample>,
    pub escalations: Vec<EscalationLog>,
    pub per_family: [usize; 4],
}

impl FuzzSummary {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "moment-ratio inequality fuzz");
        let _ = writeln!(s, "seed               {}", c.seed);
        let _ = writeln!(s, "trials             {}", self.trials);
        let _ = writeln!(s, "injected           {}", self.injected);
        let _ = writeln!(s, "t_max              {}", c.t_max);
        let _ = writeln!(s, "d                  {}", c.d);
        let _ = writeln!(s, "g_inf              {}", num(c.g_inf));
        let _ = writeln!(s, "grid (beta1, beta2, lambda, gamma):");
        for p in &c.grid {
            let _ = writeln!(
                s,
                "  {} {} {} {}",
                num(p.beta1),
                num(p.beta2),
                num(p.lambda),
                num(p.gamma())
            );
        }
        let _ = writeln!(s, "trials per family:");
        for f in Family::ALL {
            let _ = writeln!(s, "  {:<17} {}", f.name(), self.per_family[f.index()]);
        }
        let _ = writeln!(s, "min slack          {}", toml_num(self.min_slack));
        let _ = writeln!(s, "min relative slack {}", toml_num(self.min_relative_slack));
        if let Some(a) = &self.argmin {
            let _ = writeln!(
                s,
                "argmin             trial {} ({}), T = {}, beta1 = {}, beta2 = {}, lambda = {}",
                a.trial.map_or("-".into(), |t| t.to_string()),
                a.family_label(),
                a.seq.len(),
                num(a.params.beta1),
                num(a.params.beta2),
                num(a.params.lambda),
            );
        }
        let confirmed = self.escalations.iter().filter(|e| e.escalation.confirmed).count();
        let _ = writeln!(
            s,
            "near misses        {} escalated to {} bits, {} confirmed",
            self.escalations.len(),
            crate::analysis::extended::EXTENDED_PRECISION_BITS,
            confirmed
        );
        for e in &self.escalations {
            let _ = writeln!(
                s,
                "  trial {} ({}) coordinate {}: f64 slack {}, extended slack {}, {}",
                e.trial.map_or("injected".into(), |t| t.to_string()),
                e.family.map_or("injected", |f| f.name()),
                e.escalation.coordinate,
                toml_num(e.escalation.slack_f64),
                toml_num(e.escalation.slack_extended),
                if e.escalation.confirmed {
                    "confirmed"
                } else {
                    "rejected"
                },
            );
        }
        let _ = writeln!(s, "confirmed violations {}", self.violations.len());
        for v in &self.violations {
            let _ = writeln!(
                s,
                "  trial {} ({}), T = {}, slack {}",
                v.trial.map_or("injected".into(), |t| t.to_string()),
                v.family_label(),
                v.seq.len(),
                toml_num(v.slack)
            );
        }
        s
    }
}

struct TrialOutcome {
    family: Family,
    min_slack: f64,
    min_relative_slack: f64,
    violated: bool,
    escalations: Vec<Escalation>,
}

fn screen(cfg: &FuzzConfig, trial: usize) -> TrialOutcome {
    let cand = generate_candidate(cfg, trial);
    let report = conjecture_sides(&cand.seq, &cand.params);
    TrialOutcome {
        family: cand.family.expect("generated"),
        min_slack: report.min_slack,
        min_relative_slack: report.min_relative_slack(),
        violated: report.violated,
        escalations: report.escalations,
    }
}

/// Runs the search described by `cfg`, then screens every `injected`
/// candidate through the same pipeline. Injected candidates bypass the
/// grid validation and are excluded from the min-slack statistics.
pub fn run_fuzz(cfg: &FuzzConfig, injected: &[Candidate]) -> Result<FuzzSummary> {
    cfg.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..cfg.n_trials).into_par_iter().map(|k| screen(cfg, k)).collect();

    let mut summary = FuzzSummary {
        config: cfg.clone(),
        trials: cfg.n_trials,
        injected: injected.len(),
        min_slack: f64::INFINITY,
        min_relative_slack: f64::INFINITY,
        argmin: None,
        violations: Vec::new(),
        escalations: Vec::new(),
        per_family: [0; 4],
    };
    let mut argmin_trial = None;
    for (k, o) in outcomes.iter().enumerate() {
        summary.per_family[o.family.index()] += 1;
        summary.min_slack = summary.min_slack.min(o.min_slack);
        if o.min_relative_slack < summary.min_relative_slack {
            summary.min_relative_slack = o.min_relative_slack;
            argmin_trial = Some(k);
        }
        for e in &o.escalations {
            summary.escalations.push(EscalationLog {
                trial: Some(k),
                family: Some(o.family),
                escalation: e.clone(),
            });
        }
        if o.violated {
            let cand = generate_candidate(cfg, k);
            let report = conjecture_sides(&cand.seq, &cand.params);
            summary.violations.push(Counterexample::from_report(&cand, &report));
        }
    }
    if let Some(k) = argmin_trial {
        let cand = generate_candidate(cfg, k);
        let report = conjecture_sides(&cand.seq, &cand.params);
        summary.argmin = Some(Counterexample::from_report(&cand, &report));
    }
    for cand in injected {
        let report = conjecture_sides(&cand.seq, &cand.params);
        for e in &report.escalations {
            summary.escalations.push(EscalationLog {
                trial: cand.trial,
                family: cand.family,
                escalation: e.clone(),
            });
        }
        if report.violated {
            summary.violations.push(Counterexample::from_report(cand, &report));
        }
    }
    Ok(summary)
}

/// Seeded search over `n_trials` sequences of length at most `t_max`.
pub fn conjecture_fuzz(
    n_trials: usize,
    t_max: usize,
    d: usize,
    grid: &[HyperParams],
    seed: u64,
) -> Result<FuzzSummary> {
    run_fuzz(&FuzzConfig::new(n_trials, t_max, d, grid.to_vec(), seed), &[])
}
