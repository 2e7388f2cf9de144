use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("ambient vectors need an even length of at least 4, got {0}")]
    BadAmbientLength(usize),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("point outside domain: {0}")]
    Domain(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("non-finite integrand at node {node:?}")]
    NonFinite { node: Vec<f64> },
    #[error("truncation did not converge: last relative increment {increment:e} at R = {radius}")]
    Truncation { increment: f64, radius: f64 },
    #[error("unknown example `{0}`")]
    UnknownExample(String),
    #[error("not implemented: {0}")]
    NotImplemented(String),
    #[error("optimizer failure: {0}")]
    Optimizer(String),
}

pub type Result<T> = std::result::Result<T, Error>;
