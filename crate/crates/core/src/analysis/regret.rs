//! Regret `R(T)`, the three-term ADAM regret bound, and the average-regret series.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::num;
use crate::problems::{ConvexProblem, Minimizer};
use crate::trajectory::Trajectory;

/// `R(T) = sum_t (e_t(w_t) - e_t(w*))`, where `w_t` is the point at which
/// `g_t` was taken (`w_before` of record `t`).
pub fn error_sum(traj: &Trajectory, problem: &ConvexProblem, w_star: &Minimizer) -> Result<f64> {
    if traj.len() != w_star.horizon {
        return Err(Error::HorizonMismatch {
            trajectory: traj.len(),
            minimizer: w_star.horizon,
        });
    }
    regret_along(traj.records().iter().map(|r| (r.t, r.e)), problem, &w_star.w)
}

/// Regret of an arbitrary sequence of `(t, e_t(w_t))` pairs against `w_star`.
pub fn regret_along<I>(values: I, problem: &ConvexProblem, w_star: &[f64]) -> Result<f64>
where
    I: IntoIterator<Item = (usize, f64)>,
{
    // batch problems: e_t(w*) is the same for every t
    let batch_best = if problem.is_batch() {
        Some(problem.value(w_star, 1)?)
    } else {
        None
    };
    let mut total = 0.0;
    for (t, e) in values {
        let best = match batch_best {
            Some(b) => b,
            None => problem.value(w_star, t)?,
        };
        total += e - best;
    }
    Ok(total)
}

/// Largest coordinate spread, which equals `max_{n,m} |w_n - w_m|_inf`.
pub fn linf_diameter<'a, I>(points: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut lo: Vec<f64> = Vec::new();
    let mut hi: Vec<f64> = Vec::new();
    for p in points {
        if lo.is_empty() {
            lo = p.to_vec();
            hi = p.to_vec();
            continue;
        }
        for (i, &x) in p.iter().enumerate() {
            lo[i] = lo[i].min(x);
            hi[i] = hi[i].max(x);
        }
    }
    lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact `max_{n,m} |w_n - w_m|_2`.
///
/// Pairs are visited in decreasing distance from the centroid and pruned
/// with `|a - b| <= |a - c| + |b - c|`.
pub fn l2_diameter(points: &[&[f64]]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let d = points[0].len();
    let mut centroid = vec![0.0; d];
    for p in points {
        for (c, x) in centroid.iter_mut().zip(p.iter()) {
            *c += x;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);
    let mut by_radius: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(k, p)| (dist2(p, &centroid), k))
        .collect();
    by_radius.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut best = 0.0f64;
    for a in 0..n {
        let (ra, ka) = by_radius[a];
        if 2.0 * ra * (1.0 + 1e-12) < best {
            break;
        }
        for &(rb, kb) in &by_radius[a + 1..] {
            // slack for rounding in the triangle bound
            if (ra + rb) * (1.0 + 1e-12) < best {
                break;
            }
            best = best.max(dist2(points[ka], points[kb]));
        }
    }
    best
}

/// Every quantity of the three-term bound for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub horizon: usize,
    pub d: usize,
    pub regret: f64,
    /// `max |w_n - w_m|_inf` over `w(0..=T)` and `w*`
    pub d_inf: f64,
    pub d_2: f64,
    /// `max_t |g_t|_inf`
    pub g_inf: f64,
    pub g_2: f64,
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub bound: f64,
    pub slack: f64,
    /// `sum_i sqrt(T v_hat_{T,i})`
    pub sum_sqrt_t_vhat: f64,
    /// `sum_i |g_{1:T,i}|_2`
    pub sum_grad_column_norms: f64,
    pub epsilon: f64,
}

pub const BOUND_CSV_HEADER: &str =
    "T,d,regret,D_inf,D_2,G_inf,G_2,term1,term2,term3,bound,slack,sum_sqrt_T_vhat,sum_grad_column_norms,epsilon";

impl BoundReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.horizon,
            self.d,
            num(self.regret),
            num(self.d_inf),
            num(self.d_2),
            num(self.g_inf),
            num(self.g_2),
            num(self.term1),
            num(self.term2),
            num(self.term3),
            num(self.bound),
            num(self.slack),
            num(self.sum_sqrt_t_vhat),
            num(self.sum_grad_column_norms),
            num(self.epsilon),
        )
    }

    pub fn write_csv<W: Write>(reports: &[BoundReport], mut out: W) -> Result<()> {
        writeln!(out, "{BOUND_CSV_HEADER}")?;
        for r in reports {
            writeln!(out, "{}", r.csv_row())?;
        }
        Ok(())
    }

    /// Corollary ceiling `d * G_inf * sqrt(T)`.
    pub fn corollary_ceiling(&self) -> f64 {
        self.d as f64 * self.g_inf * (self.horizon as f64).sqrt()
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "regret bound check (T = {}, d = {}, epsilon = {})",
            self.horizon,
            self.d,
            num(self.epsilon)
        )?;
        writeln!(f, "  R(T)                       {}", num(self.regret))?;
        writeln!(
            f,
            "  D_inf / D_2                {} / {}",
            num(self.d_inf),
            num(self.d_2)
        )?;
        writeln!(
            f,
            "  G_inf / G_2                {} / {}",
            num(self.g_inf),
            num(self.g_2)
        )?;
        writeln!(f, "  term1 (sqrt(T v_hat))      {}", num(self.term1))?;
        writeln!(f, "  term2 ((1-lambda)^-2)      {}", num(self.term2))?;
        writeln!(f, "  term3 (gradient columns)   {}", num(self.term3))?;
        writeln!(f, "  bound                      {}", num(self.bound))?;
        writeln!(f, "  slack = bound - R(T)       {}", num(self.slack))?;
        writeln!(
            f,
            "  bound holds                {}",
            if self.slack >= 0.0 { "yes" } else { "NO" }
        )?;
        writeln!(f, "  sum_i sqrt(T v_hat_T,i)    {}", num(self.sum_sqrt_t_vhat))?;
        writeln!(f, "  sum_i |g_1:T,i|_2          {}", num(self.sum_grad_column_norms))?;
        write!(f, "  d G_inf sqrt(T)            {}", num(self.corollary_ceiling()))
    }
}

/// Evaluates `R(T)` and the three bound terms
///
/// ```text
/// term1 = D_inf^2 / (2 eta (1 - beta1)) * sum_i sqrt(T v_hat_{T,i})
/// term2 = d D_inf^2 G_inf / (2 eta (1 - beta1) (1 - lambda)^2)
/// term3 = eta (1 + beta1) / ((1 - beta1) sqrt(1 - beta2) (1 - gamma)) * sum_i |g_{1:T,i}|_2
/// ```
///
/// with `D_inf`, `G_inf` measured on the run. None of the terms involves
/// `epsilon`.
pub fn theorem_bound(traj: &Trajectory, problem: &ConvexProblem, w_star: &Minimizer) -> Result<BoundReport> {
    let last = traj
        .last()
        .ok_or_else(|| Error::InvalidParams("empty trajectory".into()))?;
    let p = traj.params();
    p.check_gamma()?;
    let regret = error_sum(traj, problem, w_star)?;
    let horizon = traj.len();
    let d = traj.dim();

    let mut points: Vec<&[f64]> = traj.iterates().collect();
    points.push(&w_star.w);
    let d_inf = linf_diameter(points.iter().copied());
    let d_2 = l2_diameter(&points);

    let mut g_inf = 0.0f64;
    let mut g_2 = 0.0f64;
    let mut col_sq = vec![0.0; d];
    for r in traj.records() {
        let mut sq = 0.0;
        for (i, &g) in r.g.iter().enumerate() {
            g_inf = g_inf.max(g.abs());
            sq += g * g;
            col_sq[i] += g * g;
        }
        g_2 = g_2.max(sq.sqrt());
    }
    let sum_grad_column_norms: f64 = col_sq.iter().map(|s| s.sqrt()).sum();
    let sum_sqrt_t_vhat: f64 = last.v_hat.iter().map(|v| (horizon as f64 * v).sqrt()).sum();

    let (eta, b1, b2, lam) = (p.eta, p.beta1, p.beta2, p.lambda);
    let term1 = d_inf * d_inf / (2.0 * eta * (1.0 - b1)) * sum_sqrt_t_vhat;
    let term2 = d as f64 * d_inf * d_inf * g_inf / (2.0 * eta * (1.0 - b1) * (1.0 - lam).powi(2));
    let term3 = eta * (1.0 + b1) / ((1.0 - b1) * (1.0 - b2).sqrt() * (1.0 - p.gamma())) * sum_grad_column_norms;
    let bound = term1 + term2 + term3;
    Ok(BoundReport {
        horizon,
        d,
        regret,
        d_inf,
        d_2,
        g_inf,
        g_2,
        term1,
        term2,
        term3,
        bound,
        slack: bound - regret,
        sum_sqrt_t_vhat,
        sum_grad_column_norms,
        epsilon: p.epsilon,
    })
}

/// Checks `sqrt(v_hat_{t,i}) <= G_inf (1 + 1e-12)` along the run.
///
/// Fails with [`Error::GradientBound`] if a recorded gradient exceeds `g_inf`.
pub fn vhat_bound_check(traj: &Trajectory, g_inf: f64) -> Result<bool> {
    for r in traj.records() {
        for (i, &g) in r.g.iter().enumerate() {
            if g.abs() > g_inf {
                return Err(Error::GradientBound {
                    t: r.t,
                    i,
                    value: g.abs(),
                    cap: g_inf,
                });
            }
        }
    }
    let cap = g_inf * (1.0 + 1e-12);
    Ok(traj.records().iter().all(|r| r.v_hat.iter().all(|v| v.sqrt() <= cap)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub horizon: usize,
    pub avg_regret: f64,
    pub avg_bound: f64,
}

/// `R(T)/T` and `bound(T)/T` over a schedule, with a log-log fit of the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSeries {
    pub points: Vec<SeriesPoint>,
    /// Fitted exponent of `bound(T)/T ~ T^slope`.
    pub slope: f64,
    pub intercept: f64,
    /// Horizons used for the fit.
    pub fit_window: Vec<usize>,
}

pub const SERIES_CSV_HEADER: &str = "T,avg_regret,avg_bound";

impl RegretSeries {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SERIES_CSV_HEADER}")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.horizon, num(p.avg_regret), num(p.avg_bound))?;
        }
        Ok(())
    }
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Builds the average-regret series and fits `log(bound/T) = c + slope log T`
/// over the largest decade `[T_max / 10, T_max]`, widened backwards to at
/// least three horizons.
pub fn average_regret_series(reports: &[BoundReport]) -> Result<RegretSeries> {
    if reports.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: reports.len(),
        });
    }
    if reports.windows(2).any(|w| w[1].horizon <= w[0].horizon) {
        return Err(Error::UnorderedReports);
    }
    let points: Vec<SeriesPoint> = reports
        .iter()
        .map(|r| SeriesPoint {
            horizon: r.horizon,
            avg_regret: r.regret / r.horizon as f64,
            avg_bound: r.bound / r.horizon as f64,
        })
        .collect();
    let t_max = points.last().unwrap().horizon as f64;
    let in_decade = points.iter().filter(|p| p.horizon as f64 >= t_max / 10.0).count();
    let window = &points[points.len() - in_decade.max(3)..];
    let xs: Vec<f64> = window.iter().map(|p| (p.horizon as f64).ln()).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.avg_bound.ln()).collect();
    let (slope, intercept) = fit_line(&xs, &ys);
    Ok(RegretSeries {
        fit_window: window.iter().map(|p| p.horizon).collect(),
        points,
        slope,
        intercept,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::optimizers::adam_run;
    use crate::params::HyperParams;
    use crate::problems::minimizer_oracle;
    use crate::trajectory::StepRecord;
    use nalgebra::{DMatrix, DVector};

    fn half_square(d: usize) -> ConvexProblem {
        ConvexProblem::quadratic(DMatrix::identity(d, d), DVector::zeros(d)).unwrap()
    }

    fn constant_trajectory(w: f64, e: f64, horizon: usize) -> Trajectory {
        let mut traj = Trajectory::new(1, HyperParams::default());
        for t in 1..=horizon {
            traj.push(StepRecord {
                t,
                w_before: vec![w],
                g: vec![w],
                e,
                m_hat: vec![w],
                v_hat: vec![w * w],
                w_after: vec![w],
            })
            .unwrap();
        }
        traj
    }

    #[test]
    fn regret_of_constant_iterates() {
        let p = half_square(1);
        let w_star = minimizer_oracle(&p, 3).unwrap();
        assert_eq!(w_star.w, vec![0.0]);
        let traj = constant_trajectory(1.0, 0.5, 3);
        assert_eq!(error_sum(&traj, &p, &w_star).unwrap(), 1.5);
        let at_opt = constant_trajectory(0.0, 0.0, 3);
        assert_eq!(error_sum(&at_opt, &p, &w_star).unwrap(), 0.0);
    }

    #[test]
    fn horizon_mismatch() {
        let p = half_square(1);
        let w_star = minimizer_oracle(&p, 4).unwrap();
        let traj = constant_trajectory(1.0, 0.5, 3);
        assert!(matches!(
            error_sum(&traj, &p, &w_star),
            Err(Error::HorizonMismatch {
                trajectory: 3,
                minimizer: 4
            })
        ));
    }

    #[test]
    fn single_step_bound_terms() {
        // w0 = 1 on e = w^2/2 gives g_1 = 1; eta = 1, beta1 = 0.9, beta2 = 0.999, lambda = 0.999
        let p = half_square(1);
        let params = HyperParams::new(1.0, 0.9, 0.999, 0.999, 1e-8).unwrap();
        let traj = adam_run(vec![1.0], |w, t| p.evaluate(w, t), &params, 1).unwrap();
        let w_star = minimizer_oracle(&p, 1).unwrap();
        let r = theorem_bound(&traj, &p, &w_star).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert_eq!(r.d_inf, 1.0);
        assert_eq!(r.g_inf, 1.0);
        assert_eq!(r.regret, 0.5);
        // 60-digit references; term1 = 1/(2 * 0.1) * sqrt(v_hat_1)
        assert!(rel(r.term1, 5.0000000000000011102) < 1e-12);
        assert!(rel(r.term2, 4999999.9999999922284) < 1e-12);
        assert!(rel(r.term3, 3169.0377849103850578) < 1e-12);
        // independent re-derivation
        let gamma = 0.81f64 / 0.999f64.sqrt();
        let term3 = 1.9 / (0.1 * 0.001f64.sqrt() * (1.0 - gamma));
        assert!(rel(r.term3, term3) < 1e-12);
        assert_eq!(r.bound, r.term1 + r.term2 + r.term3);
        assert!(r.slack >= 0.0);
    }

    #[test]
    fn zero_gradient_run() {
        // starting at the minimizer: every gradient is zero
        let p = half_square(2);
        let params = HyperParams::default();
        let traj = adam_run(vec![0.0, 0.0], |w, t| p.evaluate(w, t), &params, 5).unwrap();
        let w_star = minimizer_oracle(&p, 5).unwrap();
        let r = theorem_bound(&traj, &p, &w_star).unwrap();
        assert_eq!(r.term1, 0.0);
        assert_eq!(r.regret, 0.0);
        assert_eq!(r.slack, r.term2);
        assert!(r.slack >= 0.0);
    }

    #[test]
    fn vhat_check() {
        let traj = constant_trajectory(0.5, 0.125, 4);
        assert!(vhat_bound_check(&traj, 0.5).unwrap());
        assert!(matches!(
            vhat_bound_check(&traj, 0.25),
            Err(Error::GradientBound { t: 1, i: 0, .. })
        ));
    }

    #[test]
    fn diameters() {
        let pts: Vec<&[f64]> = vec![&[0.0, 0.0], &[3.0, 0.0], &[0.0, 4.0], &[1.0, 1.0]];
        assert_eq!(linf_diameter(pts.iter().copied()), 4.0);
        assert_eq!(l2_diameter(&pts), 5.0);
        assert_eq!(l2_diameter(&pts[..1]), 0.0);
    }

    #[test]
    fn pruned_diameter_matches_brute_force() {
        let mut rng = crate::rng::seeded_rng(5);
        for _ in 0..50 {
            let n = 1 + rng.below(60) as usize;
            let owned: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.standard_normal()).collect())
                .collect();
            let pts: Vec<&[f64]> = owned.iter().map(|v| v.as_slice()).collect();
            let mut brute = 0.0f64;
            for a in &pts {
                for b in &pts {
                    brute = brute.max(dist2(a, b));
                }
            }
            assert_eq!(l2_diameter(&pts), brute);
        }
    }

    fn synthetic(horizon: usize, bound: f64) -> BoundReport {
        BoundReport {
            horizon,
            d: 1,
            regret: 0.0,
            d_inf: 0.0,
            d_2: 0.0,
            g_inf: 0.0,
            g_2: 0.0,
            term1: bound,
            term2: 0.0,
            term3: 0.0,
            bound,
            slack: bound,
            sum_sqrt_t_vhat: 0.0,
            sum_grad_column_norms: 0.0,
            epsilon: 0.0,
        }
    }

    #[test]
    fn series_needs_three_reports() {
        assert!(matches!(
            average_regret_series(&[synthetic(10, 1.0)]),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn series_rejects_unordered() {
        let r = vec![synthetic(10, 1.0), synthetic(5, 1.0), synthetic(20, 1.0)];
        assert!(matches!(average_regret_series(&r), Err(Error::UnorderedReports)));
    }

    #[test]
    fn series_recovers_sqrt_rate() {
        let reports: Vec<BoundReport> = [100, 316, 1000, 3162, 10000]
            .iter()
            .map(|&t| synthetic(t, (t as f64).sqrt()))
            .collect();
        let s = average_regret_series(&reports).unwrap();
        assert!((s.slope + 0.5).abs() < 1e-6, "slope {}", s.slope);
        assert_eq!(s.fit_window, vec![1000, 3162, 10000]);
    }
}
