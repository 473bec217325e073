use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("step {step} exceeds the supported maximum {max}")]
    StepTooLarge { step: usize, max: usize },

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("degenerate covariance on the abelianization (smallest eigenvalue {min_eigenvalue:e})")]
    DegenerateCovariance { min_eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error(
        "insufficient sample budget: {expected_hits:.1} expected hits, \
         need at least {required_samples} samples for 100"
    )]
    InsufficientBudget { expected_hits: f64, required_samples: u64 },

    #[error("not comparable by this criterion: {0}")]
    NotComparable(String),

    #[error("generators do not span the abelianization (rank {rank}, need {needed})")]
    GeneratorsDoNotSpan { rank: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
