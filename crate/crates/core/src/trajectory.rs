//! Run state and the append-only per-step record of an ADAM run.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::num;
use crate::params::HyperParams;

/// Mutable state of one ADAM run. `t = 0` means no step taken yet.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: usize,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl AdamState {
    /// Fresh state at `w0` with zero moments.
    pub fn new(w0: Vec<f64>) -> Self {
        let d = w0.len();
        Self {
            t: 0,
            m: vec![0.0; d],
            v: vec![0.0; d],
            w: w0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

/// Everything ADAM computed at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    /// `w(t-1)`, the point where the gradient was taken.
    pub w_before: Vec<f64>,
    pub g: Vec<f64>,
    /// `e_t(w(t-1))`
    pub e: f64,
    pub m_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub w_after: Vec<f64>,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,i,w_before,g,e,m_hat,v_hat,w_after";

/// Append-only record of steps `1..=T` of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    d: usize,
    params: HyperParams,
    records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn new(d: usize, params: HyperParams) -> Self {
        Self {
            d,
            params,
            records: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    /// Number of recorded steps, i.e. the horizon `T`.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    /// Appends `rec`, which must carry `t = len + 1` and vectors of length `d`.
    pub fn push(&mut self, rec: StepRecord) -> Result<()> {
        let expected = self.records.len() + 1;
        if rec.t != expected {
            return Err(Error::Sequencing { expected, got: rec.t });
        }
        for v in [&rec.w_before, &rec.g, &rec.m_hat, &rec.v_hat, &rec.w_after] {
            if v.len() != self.d {
                return Err(Error::LengthMismatch {
                    expected: self.d,
                    got: v.len(),
                });
            }
        }
        self.records.push(rec);
        Ok(())
    }

    /// Starting point `w(0)`.
    pub fn initial_weights(&self) -> Option<&[f64]> {
        self.records.first().map(|r| r.w_before.as_slice())
    }

    /// Final point `w(T)`.
    pub fn final_weights(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.w_after.as_slice())
    }

    /// All iterates `w(0), ..., w(T)`.
    pub fn iterates(&self) -> impl Iterator<Item = &[f64]> {
        self.records
            .iter()
            .map(|r| r.w_before.as_slice())
            .chain(self.records.last().map(|r| r.w_after.as_slice()))
    }

    /// `g_{1:T,i}`
    pub fn gradient_column(&self, i: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.g[i]).collect()
    }

    /// Writes one CSV row per `(t, i)` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
        for r in &self.records {
            for i in 0..self.d {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.t,
                    i,
                    num(r.w_before[i]),
                    num(r.g[i]),
                    num(r.e),
                    num(r.m_hat[i]),
                    num(r.v_hat[i]),
                    num(r.w_after[i]),
                )?;
            }
        }
        Ok(())
    }
}

/// Functional form of [`Trajectory::push`].
pub fn record_step(mut traj: Trajectory, rec: StepRecord) -> Result<Trajectory> {
    traj.push(rec)?;
    Ok(traj)
}

/// An externally supplied `T x d` gradient matrix with a declared bound on
/// its entries. No objective is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct GradSequence {
    d: usize,
    rows: Vec<Vec<f64>>,
    g_inf_cap: f64,
}

impl GradSequence {
    pub fn new(d: usize, rows: Vec<Vec<f64>>, g_inf_cap: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidProblem("dimension must be positive".into()));
        }
        if g_inf_cap.is_nan() || g_inf_cap <= 0.0 {
            return Err(Error::InvalidProblem(format!(
                "g_inf_cap = {g_inf_cap} must be positive"
            )));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            for (i, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::NonFinite {
                        what: "gradient",
                        index: i,
                    });
                }
                if x.abs() > g_inf_cap {
                    return Err(Error::GradientBound {
                        t: t + 1,
                        i,
                        value: x.abs(),
                        cap: g_inf_cap,
                    });
                }
            }
        }
        Ok(Self { d, rows, g_inf_cap })
    }

    /// Single-coordinate sequence.
    pub fn scalar(values: Vec<f64>, g_inf_cap: f64) -> Result<Self> {
        Self::new(1, values.into_iter().map(|x| vec![x]).collect(), g_inf_cap)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn g_inf_cap(&self) -> f64 {
        self.g_inf_cap
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }
}
