use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("estimated memory {needed} bytes exceeds the cap of {cap} bytes")]
    MemoryCap { needed: u64, cap: u64 },
    #[error("factorization broke down at row {row} (pivot {pivot:e})")]
    Breakdown { row: usize, pivot: f64 },
    #[error("eigensolver did not converge after {iterations} steps; residuals {residuals:?}")]
    NoConvergence { iterations: usize, residuals: Vec<f64> },
    #[error("ill-conditioned fit (condition number {0:e})")]
    IllConditioned(f64),
}

pub type Result<T> = std::result::Result<T, OracleError>;
