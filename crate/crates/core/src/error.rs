use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised by a black-box adapter. `batch` is the index of the
/// batch (in dispatch order) that failed, `item` the offending position
/// inside it when known.
#[derive(Debug, Error)]
pub enum BlackBoxError {
    #[error("batch {batch}: transport failure: {message}")]
    Transport { batch: usize, message: String },
    #[error("batch {batch}: malformed response: {message}")]
    Malformed { batch: usize, message: String },
    #[error("batch {batch}, item {item}: prediction {value} is not a probability in [0, 1]")]
    OutOfRange { batch: usize, item: usize, value: f64 },
    #[error("batch {batch}: expected {expected} predictions, got {got}")]
    LengthMismatch { batch: usize, expected: usize, got: usize },
    #[error("black box cannot score this input: {0}")]
    Unsupported(String),
}

impl BlackBoxError {
    /// Rewrites the batch index, used when an adapter reports errors
    /// relative to a single call and the pipeline knows the global index.
    pub fn with_batch(self, index: usize) -> Self {
        match self {
            Self::Transport { message, .. } => Self::Transport { batch: index, message },
            Self::Malformed { message, .. } => Self::Malformed { batch: index, message },
            Self::OutOfRange { item, value, .. } => Self::OutOfRange {
                batch: index,
                item,
                value,
            },
            Self::LengthMismatch { expected, got, .. } => Self::LengthMismatch {
                batch: index,
                expected,
                got,
            },
            other => other,
        }
    }

    pub fn is_transient(&self) -> bool {
        matches!(self, Self::Transport { .. })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid dependency groups: {0}")]
    InvalidGroups(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    BlackBox(#[from] BlackBoxError),

    #[error("SVR solver did not converge after {iterations} iterations (max KKT violation {max_violation:e}); relax the tolerance or raise the iteration cap")]
    NotConverged { iterations: usize, max_violation: f64 },

    #[error("ridge normal equations are singular; use lambda > 0")]
    Singular,

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
