use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("correlation {0} outside [-1, 1]")]
    InvalidCorrelation(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("enumeration of {size} entries exceeds the cap of {cap}")]
    EnumerationCap { size: u128, cap: u128 },

    #[error("series truncated at degree {degree}: tail bound {tail:e} exceeds tolerance {tol:e}")]
    TruncationTooSmall { degree: usize, tail: f64, tol: f64 },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("no witness found: {0}")]
    NoWitness(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn ensure_finite(label: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(label.to_string()))
    }
}
