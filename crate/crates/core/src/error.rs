use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{op}`: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite gradient for parameter {param} (layer {layer}) at step {step}")]
    NonFiniteGradient {
        param: usize,
        layer: usize,
        step: u64,
    },

    #[error("non-finite value after layer {layer}: {what}")]
    NonFinite { layer: usize, what: String },

    #[error("training diverged at epoch {epoch}; parameters restored to the last finite state")]
    Diverged { epoch: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },

    #[error("mixing conditioning unreachable after {tries} tries; try a smaller depth")]
    Conditioning { tries: usize },

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
