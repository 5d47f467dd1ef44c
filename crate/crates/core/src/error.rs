use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("incompatible jets: {0}")]
    Incompatible(String),
    #[error("grading violation: {0}")]
    Grading(String),
    #[error("jet has a zero constant term")]
    ZeroConstant,
    #[error("invalid jet document: {0}")]
    Parse(String),
    #[error("degenerate magnetic field: {0}")]
    DegenerateField(String),
    #[error("magnetic frequencies are not simple: {0}")]
    Degeneracy(String),
    #[error("resonance at alpha-gamma = {vector:?} (divisor {divisor:.3e})")]
    Resonance { vector: Vec<i64>, divisor: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("well is too close to the domain boundary: {0}")]
    Boundary(String),
    #[error("assumption failed: {0}")]
    Assumption(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
