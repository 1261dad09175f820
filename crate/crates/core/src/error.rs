use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("duplicate doc_id {0} in ranking")]
    DuplicateInRanking(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("token id {id} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("no JSON value found in response")]
    NoJson,
    #[error("malformed ranking response: {0}")]
    MalformedResponse(String),
    #[error("window references unknown doc {0}")]
    UnknownDoc(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("negative token count")]
    NegativeCount,
    #[error("non-finite loss at epoch {epoch}, example {example}")]
    Diverged { epoch: usize, example: usize },
}
