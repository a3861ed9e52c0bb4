use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid layer sizes {0:?}: need at least two layers, all non-empty")]
    BadLayout(Vec<usize>),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("checkpoint line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NetError>;
