use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The shell maps these onto process exit codes: [`Error::Divergence`] is a
/// numerical failure (exit 2), everything else is a user or domain error
/// (exit 3).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("capacity exceeded: {what} = {value} (limit {limit})")]
    Capacity {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("symmetry violation: asymmetry {asymmetry:e} exceeds {tolerance:e}")]
    SymmetryViolation { asymmetry: f64, tolerance: f64 },

    #[error("no convergence after {iterations} iterations (last |dE| = {last_delta:e})")]
    Divergence {
        iterations: usize,
        last_delta: f64,
        trace: Vec<f64>,
    },

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("config line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("missing command")]
    MissingCommand,

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
