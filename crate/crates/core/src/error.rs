use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |A - A^dagger| entry is {max_asymmetry:e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("outcome {outcome} has zero probability ({prob:e})")]
    ZeroProbability { outcome: usize, prob: f64 },

    #[error("size {size} exceeds the configured cap {cap}: {hint}")]
    CapExceeded {
        size: u128,
        cap: u128,
        hint: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
