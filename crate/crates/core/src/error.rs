use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix has {got} entries, expected {dim}x{dim}")]
    BadShape { dim: usize, got: usize },

    #[error("matrix or vector contains a non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("matrix is not symmetric: |m[{row}][{col}] - m[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix is not positive definite: pivot {pivot:e} at index {index} is below tolerance {tol:e}")]
    NotPositiveDefinite { index: usize, pivot: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample set is empty")]
    EmptySampleSet,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("delta must lie in (0, 1), got {0}")]
    DeltaOutOfRange(f64),

    #[error("operation requires dimension 2, got {0}")]
    UnsupportedDimension(usize),

    #[error("invalid sampler spec: {0}")]
    InvalidSpec(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("epsilon grid must be non-empty")]
    EmptyGrid,

    #[error("epsilon grid must be ascending and positive")]
    BadGrid,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    /// True for malformed input (text formats, specs, arguments), false
    /// for numeric/domain failures such as a singular covariance.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::BadShape { .. }
                | Error::NonFinite { .. }
                | Error::EmptySampleSet
                | Error::InvalidSpec(_)
                | Error::InvalidRegion(_)
                | Error::EmptyGrid
                | Error::BadGrid
                | Error::InvalidArgument(_)
                | Error::Csv(_)
                | Error::NonPositiveEpsilon(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
