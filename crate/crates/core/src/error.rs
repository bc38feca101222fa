//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A constructor or operation was handed arguments outside its contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Grid resolution below the minimum needed for usable accuracy.
    #[error("resolution {got} below minimum {min} per axis")]
    ResolutionTooLow { got: usize, min: usize },

    /// Two grid-sampled objects were combined but live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Non-finite value encountered where a finite field is required.
    #[error("non-finite value at node {node}: {context}")]
    NonFinite { node: usize, context: String },

    /// Gram matrix failed the positive-definiteness check.
    #[error("Gram matrix not positive definite (smallest pivot estimate {pivot:.3e}): {context}")]
    Indefinite { pivot: f64, context: String },

    /// Conditioning guard tripped on the dense orthonormalization path.
    #[error("Gram condition estimate {cond:.3e} exceeds hard limit {limit:.1e}; refine the grid or rescale the weight")]
    IllConditioned { cond: f64, limit: f64 },

    /// A sampled tuple was rejected (zero section, shared factor, vanishing
    /// resultant). Callers count these and resample.
    #[error("sample rejected: {0}")]
    RejectedSample(String),

    /// Numerical failure that is not a rejection (solver did not converge,
    /// residual above tolerance after polishing).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Assumption check failed at a specific (k, p).
    #[error("assumption check failed at k={k}, p={p}: {context}")]
    AssumptionFailed { k: usize, p: u32, context: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Frame cache file exists but does not match the requested key.
    #[error("cache key mismatch: {0}")]
    CacheMismatch(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
