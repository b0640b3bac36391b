use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty pattern")]
    EmptyPattern,
    #[error("invalid pattern: {0}")]
    InvalidPattern(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid dissimilarity matrix: {0}")]
    InvalidMatrix(&'static str),
    #[error("degenerate coordinates")]
    DegenerateCoordinates,
    #[error("isolated query")]
    IsolatedQuery,
    #[error("zero density")]
    ZeroDensity,
    #[error("lut missing")]
    LutMissing,
    #[error("palette/extractor mismatch")]
    ExtractorMismatch,
    #[error("pattern too sparse")]
    TooSparse,
}

pub type Result<T> = core::result::Result<T, Error>;
