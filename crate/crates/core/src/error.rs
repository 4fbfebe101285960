use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("algebra dimension {0} exceeds the supported maximum {max}", max = crate::linalg::MAX_DIM)]
    TooLarge(usize),
    #[error("generators do not close under the bracket (residual {0:.3e})")]
    NotClosed(f64),
    #[error("generators are linearly dependent")]
    NotFaithful,
    #[error("model `{0}` has no matrix realization")]
    MissingRealization(String),
    #[error("function `{0}` provides no third derivatives")]
    MissingThirdDerivative(String),
    #[error("step {step}: group increment outside the logarithm chart")]
    StepTooLarge { step: usize },
    #[error("step {step}: increment is not horizontal (vertical part {vertical:.3e})")]
    NotHorizontal { step: usize, vertical: f64 },
    #[error("cylinder time {0} lies beyond the horizon {1}")]
    TimeBeyondHorizon(f64, f64),
    #[error("unknown registry id `{0}`")]
    UnknownId(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-positive value {0} where a positive function was required")]
    NonPositive(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
