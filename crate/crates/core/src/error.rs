use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("coefficients are not Hermitian-symmetric (max defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("grid of size {m} does not resolve truncation N = {n} (need M/2 >= N)")]
    UnderResolved { m: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dynamic range exceeded: β²σ_N(t) = {exponent:.3} > {budget:.3}; admissible envelope is β²σ_N(t) <= {budget:.3}")]
    DynamicRange { exponent: f64, budget: f64 },
    #[error("blow-up guard triggered at t = {t}: norm {norm:e} exceeds {limit:e}")]
    BlowUp { t: f64, norm: f64, limit: f64 },
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
