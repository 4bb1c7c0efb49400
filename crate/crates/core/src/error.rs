use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is singular or too ill-conditioned (smallest singular value {sigma_min:e})")]
    Singular { sigma_min: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (supported: 1..={max})", max = crate::geometry::MAX_DIM)]
    UnsupportedDimension(usize),

    #[error("zero vector has no projective direction")]
    ZeroVector,

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("sampling gave up after {attempts} near-singular draws")]
    SamplingBudget { attempts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("only {found} surviving paths, at least {needed} required; widen the budget")]
    InsufficientSurvivors { found: u64, needed: u64 },

    #[error("eigensolver did not converge for a {0}x{0} operator")]
    Eigensolver(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
