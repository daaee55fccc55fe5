use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A sentence pair (1-based sentence number) violates an input invariant.
    #[error("sentence {sentence}: {message}")]
    Validation { sentence: usize, message: String },

    #[error("input files disagree on line count: {0}")]
    LineCountMismatch(String),

    #[error("corrupt operation sequence: {0}")]
    CorruptSequence(String),

    #[error("operation sequence does not match stream variant: {0}")]
    VariantMismatch(String),

    #[error("orientation needs aligned units: {0}")]
    Orientation(String),

    #[error("inconsistent phrase: {0}")]
    Phrase(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    IoBare(#[from] std::io::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 3,
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}
