use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite {what} at component {index}")]
    NonFinite { what: &'static str, index: usize },

    /// `epsilon = 0` and a zero second moment met a nonzero first moment.
    #[error("division hazard at step {t}, coordinate {i}: v_hat = 0 with m_hat = {m_hat} and epsilon = 0")]
    DivisionHazard { t: usize, i: usize, m_hat: f64 },

    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),

    #[error("trajectory sequencing error: expected t = {expected}, got t = {got}")]
    Sequencing { expected: usize, got: usize },

    #[error("minimum is not attained (e.g. separable logistic data); add regularization")]
    UnboundedMinimizer,

    #[error("minimizer did not reach stationarity: |grad| = {residual:e} > {tolerance:e}")]
    NotStationary { residual: f64, tolerance: f64 },

    #[error("horizon mismatch: trajectory has T = {trajectory}, minimizer was computed for T = {minimizer}")]
    HorizonMismatch { trajectory: usize, minimizer: usize },

    #[error("insufficient data: need at least {needed} reports, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("reports must have strictly increasing T")]
    UnorderedReports,

    #[error("gradient bound violated at t = {t}, i = {i}: |g| = {value} > {cap}")]
    GradientBound { t: usize, i: usize, value: f64, cap: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("step {t}: {source}")]
    AtStep {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Step index of the failure, if the error came out of a run.
    pub fn step(&self) -> Option<usize> {
        match self {
            Error::AtStep { t, .. } => Some(*t),
            Error::DivisionHazard { t, .. } => Some(*t),
            _ => None,
        }
    }

    /// The innermost error, with any step context peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }
}
