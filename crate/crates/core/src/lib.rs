//! Quantum portfolios of Las Vegas search algorithms.
//!
//! * [`restart`]: closed-form mean, variance, efficient frontier and Sharpe
//!   ratio of amplitude-amplification restart strategies.
//! * [`sat`]: random 3-SAT instances, conflict counts and DIMACS I/O.
//! * [`qsim`]: state-vector simulation of amplitude amplification and of the
//!   conflict-phase / Hamming-mixing heuristic.
//! * [`portfolio`]: single-choice versus mixed-strategy statistics, quantum
//!   portfolio states with selector qubits, amplified portfolios.
//! * [`phase_opt`]: pattern-search training of phase choices on small
//!   instances and evaluation on larger ones.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod phase_opt;
pub mod portfolio;
pub mod qsim;
pub mod restart;
pub mod sat;
pub mod seeds;

pub use error::{Error, Result};
pub use phase_opt::{EvalConfig, EvalReport, PortfolioSet, TrainingConfig};
pub use portfolio::{StrategyStats, SuccessDistribution};

pub use qsim::{PhaseChoice, PreparedInstance, StateVector};
pub use restart::{FrontierPoint, ProblemAngle};
pub use sat::{Assignment, SatInstance};
