use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("{0} is numerically singular")]
    Singular(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("slot {slot}: requested {requested} similar pairs but only {available} are available")]
    NotEnoughSimilarPairs {
        slot: usize,
        requested: usize,
        available: usize,
    },

    #[error("slot {slot} is covered by fewer than two days")]
    FewerThanTwoDays { slot: usize },

    #[error("requested {requested} dissimilar pairs but only {available} exist")]
    NotEnoughDissimilarPairs { requested: usize, available: usize },

    #[error("point {0} has zero affinity to every point")]
    IsolatedPoint(usize),

    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(&'static str),

    #[error("training diverged at epoch {0}")]
    Diverged(usize),
}
