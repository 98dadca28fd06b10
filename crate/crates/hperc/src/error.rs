//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Hilbert-space dimension {dim}: need dim >= 2")]
    InvalidDimension { dim: usize },

    #[error("invalid ensemble size {n_states}: need at least 2 states")]
    InvalidEnsemble { n_states: usize },

    #[error("state dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("state is not unit norm: |norm^2 - 1| = {deviation:.3e} exceeds 1e-12")]
    NotNormalized { deviation: f64 },

    #[error("threshold {value} outside [0, pi/2]")]
    InvalidThreshold { value: f64 },

    #[error("epsilon must be positive, got {value}")]
    InvalidEpsilon { value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error(
        "configuration (D={dim}, M={n_states}) needs ~{required} bytes, \
         over the {budget}-byte memory budget"
    )]
    OverBudget {
        dim: usize,
        n_states: usize,
        required: u64,
        budget: u64,
    },

    #[error("{path}:{line}: {message}")]
    CsvParse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} selftest check(s) failed")]
    SelftestFailed { failed: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
