use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{0}")]
    Undefined(String),

    #[error(
        "error-bound conditions unsatisfied: need delta < 0.5 and q_A < (2 delta + 1)/2, \
         got delta = {delta}, q_A = {q_a}"
    )]
    ConvergenceConditions { delta: f64, q_a: f64 },

    #[error("horizon too short for the convergence bound: T = {t} but need T > (eps0 * phi)^2 - 1 = {min}")]
    HorizonTooShort { t: u64, min: f64 },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    NonConvergence { iterations: usize, estimate: f64 },

    #[error("invariant violated at trial {trial}, iteration {iteration}: {what} residual {residual:e}")]
    InvariantViolation {
        trial: usize,
        iteration: usize,
        what: &'static str,
        residual: f64,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
