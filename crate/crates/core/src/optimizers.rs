//! Gradient descent, the method of moments, and ADAM.
//!
//! All three follow the textbook update rules literally:
//!
//! * gradient descent: `w <- w - (eta/2) g`
//! * method of moments: `dw <- -(eta/2) g + alpha dw_prev`, `w <- w + dw`
//! * ADAM at step `t` with `b1t = beta1 * lambda^(t-1)`:
//!   `m <- b1t m + (1 - b1t) g`, `v <- beta2 v + (1 - beta2) g^2`,
//!   `m_hat = m / (1 - beta1^t)`, `v_hat = v / (1 - beta2^t)`,
//!   `w <- w - (eta / sqrt(t)) m_hat / (sqrt(v_hat) + epsilon)`.
//!
//! Bias correction uses the constant `beta1`, not the decayed `b1t`.

use crate::error::{Error, Result};
use crate::params::HyperParams;
use crate::trajectory::{AdamState, StepRecord, Trajectory};

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

fn check_finite(g: &[f64]) -> Result<()> {
    match g.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            what: "gradient",
            index,
        }),
        None => Ok(()),
    }
}

fn check_value(e: f64) -> Result<()> {
    if e.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: "objective value",
            index: 0,
        })
    }
}

/// One plain gradient descent step, `w - (eta/2) g`.
pub fn gd_step(w: &[f64], g: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_len(w.len(), g.len())?;
    Ok(w.iter().zip(g).map(|(w, g)| w - 0.5 * eta * g).collect())
}

/// Weights plus the previous weight change.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub w: Vec<f64>,
    pub delta_prev: Vec<f64>,
}

impl MomentumState {
    pub fn new(w0: Vec<f64>) -> Self {
        let d = w0.len();
        Self {
            w: w0,
            delta_prev: vec![0.0; d],
        }
    }
}

pub fn momentum_step(st: &MomentumState, g: &[f64], eta: f64, alpha: f64) -> Result<MomentumState> {
    check_len(st.w.len(), g.len())?;
    check_len(st.w.len(), st.delta_prev.len())?;
    let delta: Vec<f64> = g
        .iter()
        .zip(&st.delta_prev)
        .map(|(g, dp)| -0.5 * eta * g + alpha * dp)
        .collect();
    let w = st.w.iter().zip(&delta).map(|(w, d)| w + d).collect();
    Ok(MomentumState { w, delta_prev: delta })
}

/// One ADAM step from `st` with gradient `g` taken at `st.w`.
///
/// `e` is the objective value at `st.w`; it is only recorded. With
/// `epsilon = 0`, a coordinate with `v_hat = 0` and `m_hat = 0` does not
/// move; `v_hat = 0` with `m_hat != 0` (only reachable through underflow)
/// is a [`Error::DivisionHazard`].
pub fn adam_step(st: AdamState, g: &[f64], e: f64, p: &HyperParams) -> Result<(AdamState, StepRecord)> {
    let d = st.dim();
    check_len(d, g.len())?;
    check_len(d, st.m.len())?;
    check_len(d, st.v.len())?;
    check_finite(g)?;

    let AdamState { t, mut m, mut v, w } = st;
    let t = t + 1;
    let b1t = p.beta1_at(t);
    let bias1 = 1.0 - p.beta1.powi(t as i32);
    let bias2 = 1.0 - p.beta2.powi(t as i32);
    let eta_t = p.eta / (t as f64).sqrt();

    let mut m_hat = Vec::with_capacity(d);
    let mut v_hat = Vec::with_capacity(d);
    let mut w_after = Vec::with_capacity(d);
    for i in 0..d {
        m[i] = b1t * m[i] + (1.0 - b1t) * g[i];
        v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g[i] * g[i];
        let mh = m[i] / bias1;
        let vh = v[i] / bias2;
        let denom = vh.sqrt() + p.epsilon;
        let ratio = if denom == 0.0 {
            if mh == 0.0 {
                0.0
            } else {
                return Err(Error::DivisionHazard { t, i, m_hat: mh });
            }
        } else {
            mh / denom
        };
        m_hat.push(mh);
        v_hat.push(vh);
        w_after.push(w[i] - eta_t * ratio);
    }

    let rec = StepRecord {
        t,
        w_before: w,
        g: g.to_vec(),
        e,
        m_hat,
        v_hat,
        w_after: w_after.clone(),
    };
    Ok((AdamState { t, m, v, w: w_after }, rec))
}

/// Runs exactly `horizon` ADAM steps from `w0`.
///
/// `oracle(w, t)` returns `(e_t(w), grad e_t(w))`.
pub fn adam_run<F>(w0: Vec<f64>, oracle: F, p: &HyperParams, horizon: usize) -> Result<Trajectory>
where
    F: Fn(&[f64], usize) -> Result<(f64, Vec<f64>)>,
{
    adam_run_until(w0, oracle, p, horizon, None)
}

/// Like [`adam_run`], but stops early once `||g_t||_2 <= stop_grad_norm`.
/// The stopping gradient is not recorded.
pub fn adam_run_until<F>(
    w0: Vec<f64>,
    oracle: F,
    p: &HyperParams,
    horizon: usize,
    stop_grad_norm: Option<f64>,
) -> Result<Trajectory>
where
    F: Fn(&[f64], usize) -> Result<(f64, Vec<f64>)>,
{
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon T must be at least 1".into()));
    }
    p.validate()?;
    let mut traj = Trajectory::new(w0.len(), *p);
    let mut state = AdamState::new(w0);
    for t in 1..=horizon {
        let at = |source: Error| Error::AtStep {
            t,
            source: Box::new(source),
        };
        let (e, g) = oracle(&state.w, t).map_err(at)?;
        check_value(e).map_err(at)?;
        if let Some(threshold) = stop_grad_norm {
            if g.iter().map(|x| x * x).sum::<f64>().sqrt() <= threshold {
                log::info!("gradient norm below {threshold} at t = {t}, stopping");
                break;
            }
        }
        let (next, rec) = adam_step(state, &g, e, p).map_err(at)?;
        state = next;
        traj.push(rec)?;
        if t % 1000 == 0 {
            log::info!("adam step {t}/{horizon}");
        }
    }
    Ok(traj)
}

/// Re-executes ADAM from `w(0)` with the recorded gradients.
pub fn replay(traj: &Trajectory) -> Result<Trajectory> {
    let mut out = Trajectory::new(traj.dim(), *traj.params());
    let Some(w0) = traj.initial_weights() else {
        return Ok(out);
    };
    let mut state = AdamState::new(w0.to_vec());
    for r in traj.records() {
        let (next, rec) = adam_step(state, &r.g, r.e, traj.params())?;
        state = next;
        out.push(rec)?;
    }
    Ok(out)
}

/// One step of a non-adaptive run.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub t: usize,
    pub w_before: Vec<f64>,
    pub g: Vec<f64>,
    pub e: f64,
    pub w_after: Vec<f64>,
}

/// `horizon` steps of plain gradient descent with constant `eta`.
pub fn gd_run<F>(w0: Vec<f64>, oracle: F, eta: f64, horizon: usize) -> Result<Vec<PathStep>>
where
    F: Fn(&[f64], usize) -> Result<(f64, Vec<f64>)>,
{
    let mut w = w0;
    let mut path = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let at = |source: Error| Error::AtStep {
            t,
            source: Box::new(source),
        };
        let (e, g) = oracle(&w, t).map_err(at)?;
        check_value(e).map_err(at)?;
        check_finite(&g).map_err(at)?;
        let next = gd_step(&w, &g, eta).map_err(at)?;
        path.push(PathStep {
            t,
            w_before: std::mem::replace(&mut w, next.clone()),
            g,
            e,
            w_after: next,
        });
    }
    Ok(path)
}

/// `horizon` steps of the method of moments.
pub fn momentum_run<F>(w0: Vec<f64>, oracle: F, eta: f64, alpha: f64, horizon: usize) -> Result<Vec<PathStep>>
where
    F: Fn(&[f64], usize) -> Result<(f64, Vec<f64>)>,
{
    let mut st = MomentumState::new(w0);
    let mut path = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let at = |source: Error| Error::AtStep {
            t,
            source: Box::new(source),
        };
        let (e, g) = oracle(&st.w, t).map_err(at)?;
        check_value(e).map_err(at)?;
        check_finite(&g).map_err(at)?;
        let next = momentum_step(&st, &g, eta, alpha).map_err(at)?;
        path.push(PathStep {
            t,
            w_before: st.w,
            g,
            e,
            w_after: next.w.clone(),
        });
        st = next;
    }
    Ok(path)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn gd_examples() {
        assert_eq!(gd_step(&[0.0], &[0.0], 0.1).unwrap(), vec![0.0]);
        let w = gd_step(&[1.0], &[2.0], 0.1).unwrap();
        assert!((w[0] - 0.9).abs() < 1e-15);
        assert_eq!(gd_step(&[1.0, -1.0], &[2.0, 2.0], 1.0).unwrap(), vec![0.0, -2.0]);
        assert!(matches!(
            gd_step(&[1.0], &[1.0, 2.0], 0.1),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn momentum_examples() {
        let st = MomentumState::new(vec![0.0]);
        let s1 = momentum_step(&st, &[2.0], 0.1, 0.5).unwrap();
        assert!((s1.w[0] + 0.1).abs() < 1e-15);
        assert!((s1.delta_prev[0] + 0.1).abs() < 1e-15);
        let s2 = momentum_step(&s1, &[2.0], 0.1, 0.5).unwrap();
        assert!((s2.delta_prev[0] + 0.15).abs() < 1e-15);
        assert!((s2.w[0] + 0.25).abs() < 1e-15);
        assert!(momentum_step(&st, &[1.0, 1.0], 0.1, 0.5).is_err());
    }

    #[test]
    fn momentum_without_history_is_gd() {
        let w = vec![0.3, -1.7, 4.0];
        let g = vec![1.5, -0.25, 8.0];
        let mut st = MomentumState::new(w.clone());
        st.delta_prev = vec![0.7, -0.2, 1.1];
        let gd = gd_step(&w, &g, 0.05).unwrap();
        let mo = momentum_step(&st, &g, 0.05, 1e-15).unwrap();
        for (a, b) in mo.w.iter().zip(&gd) {
            assert!(rel(*a, *b) < 1e-12);
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let p = HyperParams::default();
        let (st, rec) = adam_step(AdamState::new(vec![1.0, -2.0]), &[0.0, 0.0], 0.0, &p).unwrap();
        assert_eq!(st.m, vec![0.0, 0.0]);
        assert_eq!(st.v, vec![0.0, 0.0]);
        assert_eq!(rec.m_hat, vec![0.0, 0.0]);
        assert_eq!(rec.v_hat, vec![0.0, 0.0]);
        assert_eq!(st.w, vec![1.0, -2.0]);
        // same with epsilon = 0: 0/0 is defined as no movement
        let p0 = p.with_epsilon(0.0);
        let (st, _) = adam_step(AdamState::new(vec![1.0]), &[0.0], 0.0, &p0).unwrap();
        assert_eq!(st.w, vec![1.0]);
    }

    #[test]
    fn first_step_hand_evaluation() {
        let p = HyperParams::new(0.1, 0.9, 0.999, 1.0 - 1e-8, 1e-8).unwrap();
        let (st, rec) = adam_step(AdamState::new(vec![0.0]), &[2.0], 0.0, &p).unwrap();
        assert!(rel(st.m[0], 0.1 * 2.0) < 1e-12);
        assert!(rel(st.v[0], 0.004) < 1e-12);
        assert!(rel(rec.m_hat[0], 2.0) < 1e-7);
        assert!(rel(rec.v_hat[0], 4.0) < 1e-12);
        assert!(rel(st.w[0], -0.1 * 2.0 / (2.0 + 1e-8)) < 1e-12);
    }

    #[test]
    fn two_steps_match_hand_computation() {
        // constant g = 1, lambda = 0.5, eta = 1, epsilon = 0
        let p = HyperParams::new(1.0, 0.9, 0.999, 0.5, 0.0).unwrap();
        let (s1, r1) = adam_step(AdamState::new(vec![0.0]), &[1.0], 0.0, &p).unwrap();
        let (s2, r2) = adam_step(s1, &[1.0], 0.0, &p).unwrap();
        assert!(rel(r1.m_hat[0], 1.0) < 1e-12);
        assert!(rel(r1.w_after[0], -1.0) < 1e-12);
        // m2 = 0.45 * 0.1 + 0.55, v2 = 0.999 * 0.001 + 0.001
        assert!(rel(s2.m[0], 0.595) < 1e-12);
        assert!(rel(s2.v[0], 0.001999) < 1e-12);
        assert!(rel(r2.m_hat[0], 0.595 / 0.19) < 1e-12);
        assert!(rel(r2.v_hat[0], 1.0) < 1e-12);
        // 60-digit reference
        assert!(rel(r2.w_after[0], -3.2143607095052413231) < 1e-12);
    }

    #[test]
    fn nonfinite_gradient_rejected() {
        let p = HyperParams::default();
        let err = adam_step(AdamState::new(vec![0.0, 0.0]), &[1.0, f64::NAN], 0.0, &p).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }));
    }

    #[test]
    fn underflowed_second_moment_is_a_hazard() {
        // g^2 underflows to zero while m stays nonzero
        let p = HyperParams::new(1.0, 0.9, 0.999, 0.9, 0.0).unwrap();
        let err = adam_step(AdamState::new(vec![0.0]), &[1e-170], 0.0, &p).unwrap_err();
        assert!(matches!(err, Error::DivisionHazard { t: 1, i: 0, .. }));
    }

    fn half_square(w: &[f64], _t: usize) -> Result<(f64, Vec<f64>)> {
        Ok((0.5 * w.iter().map(|x| x * x).sum::<f64>(), w.to_vec()))
    }

    #[test]
    fn single_step_run_equals_adam_step() {
        let p = HyperParams::default();
        let traj = adam_run(vec![1.0, -3.0], half_square, &p, 1).unwrap();
        let (_, rec) = adam_step(AdamState::new(vec![1.0, -3.0]), &[1.0, -3.0], 5.0, &p).unwrap();
        assert_eq!(traj.records(), &[rec]);
    }

    #[test]
    fn run_descends_on_quadratic() {
        let p = HyperParams::default();
        let traj = adam_run(vec![1.0, 1.0], half_square, &p, 500).unwrap();
        let norm = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let end = norm(traj.final_weights().unwrap());
        assert!(end < 2f64.sqrt());
        // independent scalar reference: each coordinate ends at 0.9568199805657703
        let w = traj.final_weights().unwrap();
        assert!((w[0] - 0.9568199805657703).abs() < 1e-13, "w {w:?}");
        assert_eq!(w[0], w[1]);
        assert_eq!(replay(&traj).unwrap(), traj);
    }

    #[test]
    fn run_rejects_zero_horizon() {
        assert!(adam_run(vec![1.0], half_square, &HyperParams::default(), 0).is_err());
    }

    #[test]
    fn oracle_error_carries_step() {
        let failing = |_: &[f64], t: usize| -> Result<(f64, Vec<f64>)> {
            if t == 3 {
                Ok((0.0, vec![f64::INFINITY]))
            } else {
                Ok((0.0, vec![1.0]))
            }
        };
        let err = adam_run(vec![0.0], failing, &HyperParams::default(), 10).unwrap_err();
        assert_eq!(err.step(), Some(3));
        assert!(matches!(err.root(), Error::NonFinite { .. }));
    }

    #[test]
    fn early_stop_on_small_gradient() {
        let p = HyperParams::new(0.5, 0.9, 0.999, 0.999, 1e-8).unwrap();
        let traj = adam_run_until(vec![1.0], half_square, &p, 10_000, Some(1e-3)).unwrap();
        assert!(traj.len() < 10_000);
    }

    #[test]
    fn gd_and_momentum_runs() {
        let path = gd_run(vec![1.0], half_square, 0.2, 3).unwrap();
        assert_eq!(path.len(), 3);
        // w <- 0.9 w on f = w^2 / 2
        assert!((path[2].w_after[0] - 0.729).abs() < 1e-15);
        let path = momentum_run(vec![1.0], half_square, 0.2, 0.5, 2).unwrap();
        // dw1 = -0.1, w1 = 0.9; dw2 = -0.09 - 0.05
        assert!((path[1].w_after[0] - 0.76).abs() < 1e-15);
    }
}
