//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or parameter shapes do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An argument violates an operation's contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A forward pass produced NaN or infinity; `location` names the layer.
    #[error("non-finite values in {location}")]
    NonFinite { location: String },

    /// A CTC target cannot be aligned to the available frames.
    #[error("CTC target needs at least {needed} frames, only {available} available{context}")]
    InfeasibleTarget {
        needed: usize,
        available: usize,
        context: String,
    },

    /// No lexicon word can be aligned to the frame sequence.
    #[error("no feasible lexicon word for this frame sequence")]
    NoFeasibleWord,

    /// Text input (ground truth, lexicon, probability dump) failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Model container is malformed or of an unexpected kind/version.
    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
