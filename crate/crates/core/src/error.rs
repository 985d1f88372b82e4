use std::io;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("input error: {0}")]
    Input(String),
    #[error("code construction failed: {0}")]
    Construction(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("numerical error: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
