use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not symmetric: entries ({i}, {j}) and ({j}, {i}) differ by {diff:e}")]
    Asymmetric { i: usize, j: usize, diff: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported distribution `{0}` (expected gaussian, rademacher or laplace)")]
    UnsupportedDistribution(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("x = {x} lies outside the numerical support (v = {v:e})")]
    OutOfSupport { x: f64, v: f64 },

    #[error("spectrum has an atom at 0; use the pseudoinverse shrinker instead")]
    AtomAtZero,

    #[error("{which} matrix is not positive definite")]
    NotPositiveDefinite { which: &'static str },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("spectrum recovery failed: {0}")]
    Recovery(String),

    #[error("parse error in {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Eigen(_) | Error::Recovery(_)
        )
    }
}
