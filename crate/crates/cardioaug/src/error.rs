use thiserror::Error;

/// Errors produced by kernel preconditions and invalid parameters.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate transform: affine linear part is not invertible")]
    DegenerateTransform,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid label value {value} (labels must be 0..=3)")]
    InvalidLabel { value: u8 },

    #[error("background has no components")]
    BackgroundClass,

    #[error("invalid class id {0} (expected 1, 2, or 3)")]
    InvalidClass(u8),

    #[error("gamma requires normalized input: value {value} outside [0, 1]")]
    UnnormalizedInput { value: f64 },

    #[error("log of non-positive probability at pixel ({row}, {col}), class {class}")]
    NonPositiveProbability { row: usize, col: usize, class: u8 },

    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),

    #[error("unmatched subject ids: {0}")]
    UnmatchedSubjects(String),
}

pub type Result<T> = std::result::Result<T, Error>;
