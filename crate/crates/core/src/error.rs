use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("zero mode missing: smallest |eigenvalue| {smallest:.3e} exceeds tolerance {tol:.3e}")]
    ZeroModeMissing { smallest: f64, tol: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
