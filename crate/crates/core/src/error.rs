use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("dimensions must be at least 1 (got {height}x{width})")]
    EmptyDimensions { height: usize, width: usize },
    #[error("data length {found} does not match expected {expected}")]
    DataLength { expected: usize, found: usize },
    #[error("value {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("binary map value {value} at index {index} is not 0 or 1")]
    NotBinary { index: usize, value: u8 },
    #[error("pixel ({row}, {col}) violates the probability simplex (sum {sum})")]
    SimplexViolation { row: usize, col: usize, sum: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("window {window} larger than map {height}x{width}")]
    WindowTooLarge { window: usize, height: usize, width: usize },
    #[error("non-finite logit at index {index}")]
    NonFiniteLogit { index: usize },
    #[error("non-finite score at index {index}")]
    NonFiniteScore { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("class {0} has no items")]
    EmptyClass(usize),
    #[error("label {label} outside 0..{num_classes}")]
    UnknownLabel { label: usize, num_classes: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("need at least one positive and one negative sample")]
    DegenerateLabels,
    #[error("probabilities invalid: {0}")]
    InvalidDistribution(&'static str),
}
