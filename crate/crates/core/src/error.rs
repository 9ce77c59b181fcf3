use thiserror::Error;

/// Errors raised by the scheduling core.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum PfssError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("job index {job} out of range for {jobs} jobs")]
    JobOutOfRange { job: usize, jobs: usize },
    #[error("front has length {got}, expected {expected} machines")]
    FrontLength { got: usize, expected: usize },
    #[error("gap is undefined for a non-positive expert value ({0})")]
    UndefinedGap(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("brute force limited to n <= {limit}, got n = {n}")]
    ScaleGuard { n: usize, limit: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("masked action: job {0} is already scheduled")]
    MaskedAction(usize),
    #[error("expert returned an invalid permutation: {0}")]
    InvalidExpert(String),
}

pub type Result<T> = std::result::Result<T, PfssError>;
