use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("solution fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),

    #[error("solution fraction {0} exceeds 1/2; the certainty-iteration formula does not apply")]
    RegimeViolation(f64),

    #[error(
        "degenerate restart strategy at t = {t}: success probability {p:e} is below the floor"
    )]
    DegenerateStrategy { t: u64, p: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{requested} variables exceeds the limit of {max}")]
    TooManyVariables { requested: usize, max: usize },

    #[error("DIMACS line {line}: {message}")]
    Dimacs { line: usize, message: String },

    #[error("{requested} qubits exceeds the memory guard of {max}")]
    QubitGuard { requested: usize, max: usize },

    #[error("dimension mismatch: expected {expected} qubits, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("instance has no solutions")]
    NoSolutions,

    #[error("success probability is identically zero")]
    ZeroSuccess,

    #[error("distribution contains a zero success probability")]
    ZeroSample,

    #[error("portfolio weights are not normalized (sum of squared magnitudes = {0})")]
    WeightsNotNormalized(f64),

    #[error("quantum and classical portfolio success probabilities differ by {0:e}")]
    EquivalenceViolation(f64),

    #[error("no solvable instances among {tried} generated")]
    NoSolvableInstances { tried: usize },
}

impl Error {
    /// True for errors that describe an infeasible problem rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::DegenerateStrategy { .. }
                | Error::NoSolutions
                | Error::ZeroSuccess
                | Error::ZeroSample
                | Error::EquivalenceViolation(_)
                | Error::NoSolvableInstances { .. }
        )
    }
}
