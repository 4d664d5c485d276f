use pw2ss_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("sequence of {len} tokens exceeds max_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("masking needs at least 2 tokens, got {0}")]
    NoMaskableTokens(usize),
    #[error("token 0 is the layout token and carries no pixel-word label")]
    LayoutTokenQueried,
    #[error("invalid token pair ({0}, {1}) for a sequence of {2}")]
    InvalidPair(usize, usize, usize),
    #[error("token index {0} outside a sequence of {1}")]
    TokenOutOfRange(usize, usize),
    #[error("retrieval index is empty")]
    EmptyIndex,
    #[error("duplicate screen id `{0}` in retrieval index")]
    DuplicateId(String),
    #[error("training set is empty or carries no usable labels")]
    DegenerateDataset,
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("embedding file: {0}")]
    EmbeddingFile(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
