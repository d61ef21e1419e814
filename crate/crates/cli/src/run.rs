//! `run`: one optimizer on one problem, with the regret bound evaluated.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use adam_regret::analysis::regret::{
    average_regret_series, l2_diameter, linf_diameter, regret_along, theorem_bound, vhat_bound_check, BoundReport,
    RegretSeries, BOUND_CSV_HEADER,
};
use adam_regret::fmt::num;
use adam_regret::optimizers::{adam_run, gd_run, momentum_run, PathStep};
use adam_regret::problems::{minimizer_oracle, ConvexProblem, Minimizer};
use adam_regret::trajectory::TRAJECTORY_CSV_HEADER;
use adam_regret::{HyperParams, Trajectory};
use rayon::prelude::*;

use crate::config::{OptimizerKind, RunConfig};
use crate::error::CliResult;
use crate::Artifacts;

/// What `run` computed, besides the files it wrote.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub regret: f64,
    /// Bound reports: the configured epsilon first, then `epsilon = 0` when it differs.
    pub reports: Vec<BoundReport>,
    pub series: Option<RegretSeries>,
    pub final_objective: f64,
    pub files: Vec<PathBuf>,
}

fn oracle(problem: &ConvexProblem) -> impl Fn(&[f64], usize) -> adam_regret::Result<(f64, Vec<f64>)> + '_ {
    move |w, t| problem.evaluate(w, t)
}

/// The iterate path of any optimizer, without ADAM's moment columns.
pub fn optimizer_path(cfg: &RunConfig, problem: &ConvexProblem) -> CliResult<Vec<PathStep>> {
    let w0 = cfg.initial_point();
    let p = &cfg.params;
    Ok(match cfg.optimizer {
        OptimizerKind::Gd => gd_run(w0, oracle(problem), p.eta, cfg.horizon)?,
        OptimizerKind::Momentum => momentum_run(w0, oracle(problem), p.eta, p.alpha, cfg.horizon)?,
        OptimizerKind::Adam => adam_run(w0, oracle(problem), p, cfg.horizon)?
            .records()
            .iter()
            .map(|r| PathStep {
                t: r.t,
                w_before: r.w_before.clone(),
                g: r.g.clone(),
                e: r.e,
                w_after: r.w_after.clone(),
            })
            .collect(),
    })
}

fn path_csv(path: &[PathStep]) -> Vec<u8> {
    let mut s = String::new();
    s.push_str(TRAJECTORY_CSV_HEADER);
    s.push('\n');
    for r in path {
        for i in 0..r.w_before.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},,,{}",
                r.t,
                i,
                num(r.w_before[i]),
                num(r.g[i]),
                num(r.e),
                num(r.w_after[i])
            );
        }
    }
    s.into_bytes()
}

fn adam_bound(
    problem: &ConvexProblem,
    cfg: &RunConfig,
    params: &HyperParams,
    horizon: usize,
) -> CliResult<(Trajectory, BoundReport)> {
    let traj = adam_run(cfg.initial_point(), oracle(problem), params, horizon)?;
    let w_star = minimizer_oracle(problem, horizon)?;
    let report = theorem_bound(&traj, problem, &w_star)?;
    Ok((traj, report))
}

fn header(cfg: &RunConfig) -> String {
    let p = &cfg.params;
    let mut s = String::new();
    let _ = writeln!(s, "optimizer   {}", cfg.optimizer.name());
    let _ = writeln!(
        s,
        "problem     {} (d = {}, seed = {}, n_samples = {}, mu = {}, noise_scale = {})",
        cfg.problem.kind.name(),
        cfg.problem.d,
        cfg.problem.seed,
        cfg.problem.samples(),
        num(cfg.problem.mu),
        num(cfg.problem.noise_scale)
    );
    let _ = writeln!(s, "T           {}", cfg.horizon);
    let _ = writeln!(
        s,
        "params      eta = {}, beta1 = {}, beta2 = {}, lambda = {}, epsilon = {}, alpha = {}",
        num(p.eta),
        num(p.beta1),
        num(p.beta2),
        num(p.lambda),
        num(p.epsilon),
        num(p.alpha)
    );
    let _ = writeln!(s, "gamma       {}", num(p.gamma()));
    s
}

fn minimizer_lines(w_star: &Minimizer) -> String {
    format!(
        "minimizer   |grad sum e_t(w*)| = {} (tolerance {})\n",
        num(w_star.residual),
        num(w_star.tolerance)
    )
}

/// Executes `run` and writes `trajectory.csv`, `bound_report.csv`,
/// `report.txt` and, with a schedule, `corollary.csv` into `out_dir`.
pub fn cmd_run(cfg: &RunConfig, out_dir: &Path) -> CliResult<RunSummary> {
    let problem = cfg.build_problem()?;
    let mut files = Artifacts::default();
    let mut report_txt = header(cfg);

    if cfg.optimizer != OptimizerKind::Adam {
        let path = optimizer_path(cfg, &problem)?;
        let w_star = minimizer_oracle(&problem, cfg.horizon)?;
        let regret = regret_along(path.iter().map(|r| (r.t, r.e)), &problem, &w_star.w)?;
        let mut points: Vec<&[f64]> = path.iter().map(|r| r.w_before.as_slice()).collect();
        if let Some(last) = path.last() {
            points.push(&last.w_after);
        }
        points.push(&w_star.w);
        let d_inf = linf_diameter(points.iter().copied());
        let d_2 = l2_diameter(&points);
        let g_inf = path.iter().flat_map(|r| r.g.iter()).fold(0.0f64, |a, g| a.max(g.abs()));
        let g_2 = path
            .iter()
            .map(|r| r.g.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        let last = path.last().expect("T >= 1");
        let final_objective = problem.value(&last.w_after, last.t)?;

        files.add("trajectory.csv", path_csv(&path));
        // bound terms only exist for ADAM; their columns stay empty
        files.add(
            "bound_report.csv",
            format!(
                "{BOUND_CSV_HEADER}\n{},{},{},{},{},{},{},,,,,,,,{}\n",
                cfg.horizon,
                cfg.problem.d,
                num(regret),
                num(d_inf),
                num(d_2),
                num(g_inf),
                num(g_2),
                num(cfg.params.epsilon)
            )
            .into_bytes(),
        );
        report_txt.push_str(&minimizer_lines(&w_star));
        let _ = writeln!(report_txt, "R(T)        {}", num(regret));
        let _ = writeln!(report_txt, "D_inf / D_2 {} / {}", num(d_inf), num(d_2));
        let _ = writeln!(report_txt, "G_inf / G_2 {} / {}", num(g_inf), num(g_2));
        let _ = writeln!(report_txt, "final e_T   {}", num(final_objective));
        let _ = writeln!(
            report_txt,
            "the regret bound applies to adam only; no bound terms computed"
        );
        files.add("report.txt", report_txt.into_bytes());
        return Ok(RunSummary {
            regret,
            reports: Vec::new(),
            series: None,
            final_objective,
            files: files.write_all(out_dir)?,
        });
    }

    let (traj, report) = adam_bound(&problem, cfg, &cfg.params, cfg.horizon)?;
    let w_star = minimizer_oracle(&problem, cfg.horizon)?;
    let last = traj.last().expect("T >= 1");
    let final_objective = problem.value(&last.w_after, last.t)?;
    let vhat_ok = vhat_bound_check(&traj, report.g_inf)?;

    let mut reports = vec![report.clone()];
    let mut eps_note = None;
    if cfg.params.epsilon != 0.0 {
        match adam_bound(&problem, cfg, &cfg.params.with_epsilon(0.0), cfg.horizon) {
            Ok((_, r)) => reports.push(r),
            Err(e) => eps_note = Some(format!("epsilon = 0 companion run failed: {e}")),
        }
    }

    let series = match &cfg.schedule {
        Some(schedule) => {
            let scheduled: Vec<BoundReport> = schedule
                .par_iter()
                .map(|&t| adam_bound(&problem, cfg, &cfg.params, t).map(|(_, r)| r))
                .collect::<CliResult<_>>()?;
            Some((average_regret_series(&scheduled)?, scheduled))
        }
        None => None,
    };

    let mut traj_csv = Vec::new();
    traj.write_csv(&mut traj_csv)?;
    files.add("trajectory.csv", traj_csv);
    let mut bound_csv = Vec::new();
    BoundReport::write_csv(&reports, &mut bound_csv)?;
    files.add("bound_report.csv", bound_csv);

    report_txt.push_str(&minimizer_lines(&w_star));
    let _ = writeln!(report_txt, "final e_T   {}", num(final_objective));
    report_txt.push('\n');
    for r in &reports {
        let _ = writeln!(report_txt, "{r}\n");
    }
    if let Some(note) = &eps_note {
        let _ = writeln!(report_txt, "{note}\n");
    }
    let ceiling = report.corollary_ceiling();
    let _ = writeln!(report_txt, "estimates against d G_inf sqrt(T) = {}", num(ceiling));
    let _ = writeln!(
        report_txt,
        "  sum_i |g_1:T,i|_2 <= ceiling     {}",
        report.sum_grad_column_norms <= ceiling * (1.0 + 1e-12)
    );
    let _ = writeln!(
        report_txt,
        "  sum_i sqrt(T v_hat) <= ceiling   {}",
        report.sum_sqrt_t_vhat <= ceiling * (1.0 + 1e-12)
    );
    let _ = writeln!(report_txt, "  sqrt(v_hat_t,i) <= G_inf         {vhat_ok}");

    if let Some((s, scheduled)) = &series {
        let mut csv = Vec::new();
        s.write_csv(&mut csv)?;
        files.add("corollary.csv", csv);
        let _ = writeln!(report_txt, "\naverage regret over T_schedule");
        for (pt, r) in s.points.iter().zip(scheduled) {
            let _ = writeln!(
                report_txt,
                "  T = {:>8}  R/T = {}  bound/T = {}  slack = {}",
                pt.horizon,
                num(pt.avg_regret),
                num(pt.avg_bound),
                num(r.slack)
            );
        }
        let window: Vec<String> = s.fit_window.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(
            report_txt,
            "  fitted slope of log(bound/T) over T in {{{}}}: {}",
            window.join(", "),
            num(s.slope)
        );
    }
    files.add("report.txt", report_txt.into_bytes());

    Ok(RunSummary {
        regret: report.regret,
        reports,
        series: series.map(|(s, _)| s),
        final_objective,
        files: files.write_all(out_dir)?,
    })
}
