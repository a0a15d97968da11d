use thiserror::Error;

/// Failure modes of an adaptive quadrature.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("subdivision limit {limit} reached; worst interval [{lo:e}, {hi:e}] has error {err:e} (tolerance {tol:e})")]
    MaxSubdivisions {
        limit: usize,
        lo: f64,
        hi: f64,
        err: f64,
        tol: f64,
    },
    #[error("integrand returned a non-finite value at x = {x:e}")]
    NonFinite { x: f64 },
    #[error("Matsubara sum did not converge after {terms} terms; last term {last:e}")]
    SumNotConverged { terms: usize, last: f64 },
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("quadrature failure: {0}")]
    Quadrature(#[from] QuadError),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn parameter<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
