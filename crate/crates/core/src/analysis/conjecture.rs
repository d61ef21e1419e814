//! Both sides of the moment-ratio inequality
//!
//! ```text
//! sum_{t=1}^T m_hat_{t,i}^2 / sqrt(t v_hat_{t,i})  <=  2 / ((1 - gamma) sqrt(1 - beta2)) * |g_{1:T,i}|_2
//! ```
//!
//! evaluated per coordinate on a raw gradient sequence. The moment
//! recursions are ADAM's (decayed `beta1_t`, bias correction with constant
//! `beta1`), but no weights are updated. A term with `v_hat = 0` contributes
//! zero, since it forces `m_hat = 0`.

use std::io::Write;

use crate::analysis::extended::{coordinate_sides_extended, EXTENDED_PRECISION_BITS};
use crate::error::Result;
use crate::fmt::num;
use crate::params::HyperParams;
use crate::trajectory::GradSequence;

/// Coordinates with `slack < NEAR_MISS_RTOL * rhs` are re-evaluated at extended precision.
pub const NEAR_MISS_RTOL: f64 = 1e-6;

/// Outcome of re-evaluating one near-miss coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Escalation {
    pub coordinate: usize,
    pub slack_f64: f64,
    pub slack_extended: f64,
    pub precision_bits: usize,
    /// Extended slack is strictly negative.
    pub confirmed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjectureReport {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `min_i rhs_i - lhs_i`, using the extended value for escalated coordinates.
    pub min_slack: f64,
    pub violated: bool,
    pub escalations: Vec<Escalation>,
}

impl ConjectureReport {
    /// Per-coordinate slack in `f64`.
    pub fn slacks(&self) -> Vec<f64> {
        self.lhs.iter().zip(&self.rhs).map(|(l, r)| r - l).collect()
    }

    /// `min_i slack_i / |rhs_i|` over coordinates with `rhs_i != 0`;
    /// `+inf` when every coordinate is identically zero.
    pub fn min_relative_slack(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, (l, r)) in self.lhs.iter().zip(&self.rhs).enumerate() {
            if *r == 0.0 {
                continue;
            }
            let slack = self
                .escalations
                .iter()
                .find(|e| e.coordinate == i)
                .map_or(r - l, |e| e.slack_extended);
            best = best.min(slack / r.abs());
        }
        best
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,lhs,rhs,slack")?;
        for (i, (l, r)) in self.lhs.iter().zip(&self.rhs).enumerate() {
            writeln!(out, "{},{},{},{}", i, num(*l), num(*r), num(r - l))?;
        }
        Ok(())
    }
}

/// `f64` sides for a single gradient column.
pub fn coordinate_sides(column: &[f64], p: &HyperParams) -> (f64, f64) {
    let mut m = 0.0;
    let mut v = 0.0;
    let mut lhs = 0.0;
    let mut sum_sq = 0.0;
    for (k, &g) in column.iter().enumerate() {
        let t = k + 1;
        let b1t = p.beta1_at(t);
        m = b1t * m + (1.0 - b1t) * g;
        v = p.beta2 * v + (1.0 - p.beta2) * g * g;
        let m_hat = m / (1.0 - p.beta1.powi(t as i32));
        let v_hat = v / (1.0 - p.beta2.powi(t as i32));
        if v_hat > 0.0 {
            lhs += m_hat * m_hat / (t as f64 * v_hat).sqrt();
        } else if m_hat != 0.0 {
            lhs = f64::INFINITY;
        }
        sum_sq += g * g;
    }
    let rhs = 2.0 / ((1.0 - p.gamma()) * (1.0 - p.beta2).sqrt()) * sum_sq.sqrt();
    (lhs, rhs)
}

/// Evaluates both sides for every coordinate of `seq`, escalating
/// near-misses to extended precision.
///
/// Callers are expected to pass parameters with `gamma < 1`; with
/// `gamma >= 1` the right side is negative or infinite and every nonzero
/// coordinate is reported as violated.
pub fn conjecture_sides(seq: &GradSequence, p: &HyperParams) -> ConjectureReport {
    let d = seq.dim();
    let mut lhs = Vec::with_capacity(d);
    let mut rhs = Vec::with_capacity(d);
    let mut escalations = Vec::new();
    let mut min_slack = f64::INFINITY;
    for i in 0..d {
        let column = seq.column(i);
        let (l, r) = coordinate_sides(&column, p);
        let slack = r - l;
        let mut effective = slack;
        // NaN slack also counts as a near miss
        let screened_out = slack >= NEAR_MISS_RTOL * r;
        if !screened_out {
            let ext = coordinate_sides_extended(&column, p, EXTENDED_PRECISION_BITS);
            log::info!(
                "near miss at coordinate {i}: f64 slack {}, extended slack {} ({})",
                num(slack),
                num(ext.slack),
                if ext.negative { "confirmed" } else { "rejected" }
            );
            effective = ext.slack;
            escalations.push(Escalation {
                coordinate: i,
                slack_f64: slack,
                slack_extended: ext.slack,
                precision_bits: ext.precision_bits,
                confirmed: ext.negative,
            });
        }
        min_slack = min_slack.min(effective);
        lhs.push(l);
        rhs.push(r);
    }
    if d == 0 {
        min_slack = f64::INFINITY;
    }
    let violated = escalations.iter().any(|e| e.confirmed);
    ConjectureReport {
        lhs,
        rhs,
        min_slack,
        violated,
        escalations,
    }
}
