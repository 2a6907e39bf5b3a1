use thiserror::Error;

/// Errors raised by procedures, bounds, generators and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdrError {
    #[error("nominal level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("exceedance level must lie in (0, 1), got {0}")]
    InvalidGamma(f64),
    #[error("null proportion must lie in (0, 1], got {0}")]
    InvalidPi0(f64),
    #[error("p-value at index {index} is outside [0, 1]: {value}")]
    InvalidPValue { index: usize, value: f64 },
    #[error("null mask has length {mask} but there are {pvalues} p-values")]
    MaskLengthMismatch { pvalues: usize, mask: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("index {index} out of range for {len} hypotheses")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate rejected index {0}")]
    DuplicateIndex(usize),
    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("correlation {rho} outside admissible range [{lower}, 1)")]
    CorrelationOutOfRange { rho: f64, lower: f64 },
    #[error("covariance matrix is not positive semidefinite (min eigenvalue {0})")]
    NotPositiveSemidefinite(f64),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("incompatible generator and adversary: {0}")]
    Incompatible(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, FdrError>;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(FdrError::InvalidAlpha(alpha))
    }
}

pub(crate) fn check_pi0(pi0: f64) -> Result<()> {
    if pi0 > 0.0 && pi0 <= 1.0 {
        Ok(())
    } else {
        Err(FdrError::InvalidPi0(pi0))
    }
}
