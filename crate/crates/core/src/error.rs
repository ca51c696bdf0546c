use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LerayError {
    #[error("invalid circle trace: {0}")]
    InvalidTrace(String),
    #[error("Hoelder exponent {0} is outside (0, 1]")]
    InvalidExponent(f64),
    #[error("cannot evaluate a (-1)-homogeneous field at the origin")]
    OriginEvaluation,
    #[error("quadrature budget exceeded: {needed} panels requested, limit is {limit}")]
    QuadratureBudgetExceeded { needed: usize, limit: usize },
    #[error("geometry error: {0}")]
    GeometryError(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("parameter out of domain: {0}")]
    DomainError(String),
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error(
        "Picard iteration did not converge after {iterations} iterations \
         (last residual {last_residual:e}, diverged: {divergence_flag})"
    )]
    NonConvergence {
        iterations: usize,
        last_residual: f64,
        divergence_flag: bool,
    },
    #[error("continuation stalled at sigma = {sigma_reached}")]
    ContinuationStalled { sigma_reached: f64 },
    #[error("decay fit annulus contains no samples")]
    EmptyAnnulus,
    #[error("malformed grid field data: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LerayError {
    fn from(e: std::io::Error) -> Self {
        LerayError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LerayError>;
