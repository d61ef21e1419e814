//! Numerical checks layered on top of recorded runs and raw gradient sequences.

pub mod conjecture;
pub mod extended;
pub mod fuzz;
pub mod geometric;
pub mod regret;

pub use conjecture::{conjecture_sides, ConjectureReport, Escalation};
pub use fuzz::{conjecture_fuzz, run_fuzz, synthetic_violation, Counterexample, Family, FuzzConfig, FuzzSummary};
pub use geometric::{geometric_sum_bound_check, geometric_sum_closed_form};
pub use regret::{average_regret_series, error_sum, theorem_bound, vhat_bound_check, BoundReport, RegretSeries};
