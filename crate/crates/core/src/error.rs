use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by model evaluation, stepping, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {op} is undefined at x = {x}")]
    Domain { op: &'static str, x: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("numeric overflow at step {step}: {detail}")]
    NumericOverflow { step: usize, detail: String },

    #[error("implicit solver did not converge within {iterations} iterations (last |G| = {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no sign change of the implicit residual on ({lo:e}, {hi:e})")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("{count} is not divisible by {factor}")]
    Divisibility { count: usize, factor: usize },

    #[error("degenerate fit input: {0}")]
    DegenerateFit(String),

    #[error("path {path}: {source}")]
    Path {
        path: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            reason: reason.into(),
        }
    }

    /// Strips path annotations to reach the error that actually occurred.
    pub fn root(&self) -> &Error {
        match self {
            Error::Path { source, .. } | Error::Step { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_numeric_overflow(&self) -> bool {
        matches!(self.root(), Error::NumericOverflow { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
