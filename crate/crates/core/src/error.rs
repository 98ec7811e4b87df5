use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("point s = {s} outside the admissible range [{min}, {max}]")]
    OutOfDomain { s: f64, min: f64, max: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("potential vanishes where it must be divided by: {0}")]
    VanishingPotential(String),

    #[error("no horizon: {0}")]
    NoHorizon(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("not converged after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value at {location}")]
    NonFinite { location: String },

    #[error("unsupported: {0}")]
    Unsupported(String),
}
