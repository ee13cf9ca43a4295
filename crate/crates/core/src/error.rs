use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("cannot pair batches: {0}")]
    Pairing(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("class id {id} outside 1..={max}")]
    ClassOutOfRange { id: usize, max: usize },
    #[error("non-finite gradient in tensor `{0}`")]
    NonFiniteGradient(String),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
