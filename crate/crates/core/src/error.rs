use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid norm: {0}")]
    InvalidNorm(String),

    #[error("invalid map expression: {0}")]
    InvalidMap(String),

    #[error("max-plus row {row} has only bottom entries")]
    BottomRow { row: usize },

    #[error("expression is not piecewise-affine; exact evaluation unavailable")]
    NotPiecewiseAffine,

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// A monotonicity or sign property implied by nonexpansiveness failed.
    #[error("nonexpansiveness contract breached: {0}")]
    ContractBreach(String),

    #[error("map is not nonexpansive: {0}")]
    NotNonexpansive(String),

    #[error("precondition failed: {what} (residual {residual})")]
    Precondition { what: String, residual: f64 },

    #[error("map lacks the required structural flag: {0}")]
    MissingFlag(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A limit needed for an exact answer could only be estimated.
    #[error("limit could not be decided: {0}")]
    Inconclusive(String),

    #[error("parse error: {0}")]
    Parse(String),
}
