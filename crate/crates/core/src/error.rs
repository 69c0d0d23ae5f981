use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = UdgError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum UdgError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {left_h}x{left_w} vs {right_h}x{right_w}")]
    DimensionMismatch {
        left_h: usize,
        left_w: usize,
        right_h: usize,
        right_w: usize,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("no directional signal: image gradients are below {eps:e}")]
    NoSignal { eps: f64 },

    #[error("numeric failure in {stage} at iteration {iteration}")]
    NumericFailure { stage: &'static str, iteration: usize },

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl UdgError {
    pub(crate) fn io(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        UdgError::Io {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        UdgError::InvalidParam {
            field,
            reason: reason.into(),
        }
    }
}
