use thiserror::Error;

pub type Result<T, E = KernelError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("{op}: dimension mismatch, expected {expected}, got {got}")]
    Dimension { op: &'static str, expected: String, got: String },
    #[error("{op}: batch of {size} values is too small for batch statistics")]
    DegenerateBatch { op: &'static str, size: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("optimizer state: {0}")]
    State(String),
    #[error("non-finite value in {what} at coordinate {index}")]
    NonFinite { what: String, index: usize },
}

impl KernelError {
    /// Shape mismatch in `op`.
    pub fn dim(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        KernelError::Dimension {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
