//! ADAM with a decaying first-moment rate, plain gradient descent and
//! momentum, synthetic convex online problems, and numerical checks of the
//! ADAM regret bound.
//!
//! Every numeric output is written with 17 significant digits through
//! [`fmt::num`], and every random draw comes from a [`rng::SeededRng`], so
//! a run is reproducible from its configuration alone.

pub mod analysis;
pub mod error;
pub mod fmt;
pub mod optimizers;
pub mod params;
pub mod problems;
pub mod rng;
pub mod trajectory;

pub use error::{Error, Result};
pub use optimizers::{adam_run, adam_step, gd_step, momentum_step};
pub use params::HyperParams;
pub use problems::{minimizer_oracle, ConvexProblem, Minimizer, ProblemKind, ProblemSpec};
pub use trajectory::{AdamState, GradSequence, StepRecord, Trajectory};
