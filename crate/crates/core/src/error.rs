use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("domain error in {op} at ({row}, {col}): {reason}")]
    Domain {
        op: &'static str,
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("index {index} out of range for {what} of length {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error(
        "sinkhorn denominator underflow at step {step} ({side} scaling, entry {entry}); \
         increase gamma or reduce the cost scale"
    )]
    Underflow {
        step: usize,
        side: &'static str,
        entry: usize,
    },

    #[error("coarsening level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value while evaluating {0}")]
    NonFinite(String),

    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {reason}")]
    Format {
        file: String,
        line: usize,
        reason: String,
    },

    #[error("feature spec unavailable: {0}")]
    Spec(String),

    #[error("checkpoint incompatible: {0}")]
    Compat(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn at_level(self, level: usize) -> Self {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }
}
