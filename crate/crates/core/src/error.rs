use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {component}: expected {expected}, got {actual}")]
    DimensionMismatch {
        component: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("vector must have at least one entry")]
    EmptyVector,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("non-finite iterate produced at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("step constant undefined on this trace: no C1 iterations")]
    NoC1Iterations,

    #[error("trace is S1/S2-like; use geometric bound ({alternations} C1->C2 alternation(s) found, need 2)")]
    TooFewAlternations { alternations: usize },

    #[error("trace tail mixes C1 and C2; use the piecewise geometric (S3) bound")]
    MixedTail,

    #[error("insufficient iterations for bound construction ({0} row(s))")]
    InsufficientIterations(usize),

    #[error("trace violates invariant: {0}")]
    TraceInvariant(String),

    #[error("malformed CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error("invalid PGM image: {0}")]
    Pgm(String),

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("cannot read image {path}: {source}")]
    ImageRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write to {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
