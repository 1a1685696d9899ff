use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("concentration must be positive, got {0}")]
    NonPositiveConcentration(f64),

    #[error("data set is empty")]
    EmptyData,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("covariance matrix not positive definite (largest jitter tried {0:e})")]
    NotPositiveDefinite(f64),

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("simulation budget exhausted")]
    BudgetExhausted,

    #[error("simulator failed: {0}")]
    Simulator(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
