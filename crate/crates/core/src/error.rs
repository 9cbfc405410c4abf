use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the pipeline.
///
/// The variants are grouped by who is at fault: the environment (`Io`),
/// the input data (`Parse`, `Data`), configuration (`Config`,
/// `Checkpoint`), or the caller breaking an operation's contract
/// (`Contract`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
            Error::Data(_) => "data",
            Error::Config(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::Contract(_) => "contract",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
