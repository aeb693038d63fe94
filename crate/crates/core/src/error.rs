use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}: {text:?}")]
    Parse {
        line: usize,
        message: String,
        text: String,
    },

    #[error("unknown vertex id {0}")]
    UnknownVertex(usize),

    #[error("vertex {id} ({label}) is not an entity")]
    NotAnEntity { id: usize, label: String },

    #[error("vertex {0} has no community assignment")]
    MissingCommunity(usize),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("unknown token {0:?}")]
    UnknownToken(String),

    #[error("entity {0:?} has no embedding")]
    MissingEntity(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>, text: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
            text: text.into(),
        }
    }
}
