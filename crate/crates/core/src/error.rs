use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// An eigenphase sits on (or too close to) the principal-log branch cut at -pi.
    #[error("eigenphase {phase} is within {guard} of the branch cut; shorten the evolution")]
    BranchCut { phase: f64, guard: f64 },

    #[error("segment {index} has zero duration and no well-defined Hamiltonian")]
    DegenerateWindow { index: usize },

    #[error("BCH truncation order {0} is not supported")]
    UnsupportedOrder(usize),

    #[error("signal never fell below 1/e (last value {last})")]
    NotDecayed { last: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
