use thiserror::Error;

/// Errors produced by the simulation kernel.
#[derive(Debug, Error)]
pub enum Error {
    #[error("basis mismatch: operator expects {expected}, got {found}")]
    BasisMismatch { expected: String, found: String },

    #[error("state {0} is not part of the basis")]
    MissingState(String),

    #[error("operator is not Hermitian (max |A - A^dag| = {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not square ({rows} x {cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("coherent-state truncation loss {loss:.3e} exceeds threshold {threshold:.3e}")]
    TruncationLoss { loss: f64, threshold: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e}) after {accepted} accepted steps")]
    StepUnderflow { t: f64, h: f64, accepted: usize },

    #[error("dimension {dim} exceeds the configured budget {budget}")]
    DimensionBudget { dim: usize, budget: usize },

    #[error("unsupported basis: {0}")]
    UnsupportedBasis(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero-norm state cannot be normalized")]
    ZeroNorm,

    #[error("state norm {0} differs from 1 by more than 1e-10")]
    NotNormalized(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
