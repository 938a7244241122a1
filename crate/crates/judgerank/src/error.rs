//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("invalid outcome {0}: expected 0, 0.5 or 1")]
    InvalidOutcome(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("roster error: {0}")]
    Roster(String),

    #[error("index {index} out of bounds for {what} of size {size}")]
    IndexOutOfBounds {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("comparison graph is disconnected ({n_components} components)")]
    Disconnected { n_components: usize },

    #[error("no comparison data")]
    EmptyData,

    #[error("non-finite parameter value encountered")]
    NonFinite,

    #[error("gauge scale must be nonzero")]
    ZeroGaugeScale,

    #[error("design is degenerate: all triple probabilities are zero")]
    DegenerateDesign,

    #[error(
        "information matrix is rank deficient beyond the gauge directions \
         (expected rank {expected}, eigenvalue {eigenvalue:.3e} below cutoff {cutoff:.3e})"
    )]
    RankDeficient {
        expected: usize,
        eigenvalue: f64,
        cutoff: f64,
    },

    #[error("confidence level {0} must lie in (0, 1)")]
    InvalidLevel(f64),

    #[error("correlation undefined for a constant vector")]
    ConstantVector,

    #[error("vectors have mismatched lengths {0} and {1}")]
    LengthMismatch(usize, usize),

    #[error("degenerate truth specification: {0}")]
    DegenerateSpec(String),

    #[error("infeasible study cell: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
