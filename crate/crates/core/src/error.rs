use std::io;

use thiserror::Error;

/// Errors produced by the transform, estimation and decomposition routines.
#[derive(Debug, Error)]
pub enum SsctError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, SsctError>;
