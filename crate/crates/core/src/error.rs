use thiserror::Error;

use crate::classify::Kind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("expected a {expected} problem, found {found}")]
    ClassificationMismatch { expected: String, found: Kind },

    #[error("arity mismatch: {0}")]
    Arity(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("no convergence after {iterations} iterations (KKT residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("limit exceeded: {0}")]
    LimitExceeded(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("cancelled")]
    Cancelled,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
