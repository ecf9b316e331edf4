use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("entity surface is empty after normalization: {0:?}")]
    EmptySurface(String),

    #[error("relation name is empty")]
    EmptyRelation,

    #[error("triple weight must be finite and non-negative, got {0}")]
    InvalidWeight(f64),

    #[error("duplicate template for relation {relation:?} on rows {first} and {second}")]
    DuplicateTemplate {
        relation: String,
        first: usize,
        second: usize,
    },

    #[error("entity {entity:?} is neither head nor tail of the triple")]
    NotInTriple { entity: String },

    #[error("invalid mask token {token:?}: {reason}")]
    InvalidMask { token: String, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot score an empty token sequence")]
    EmptySequence,

    #[error("answer index {index} out of range for {len} answers")]
    AnswerIndex { index: usize, len: usize },

    #[error("score is not finite: {0}")]
    NonFiniteScore(String),

    #[error("a scored batch needs at least one negative")]
    NoNegatives,

    #[error("cannot average the loss of zero batches")]
    NoBatches,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("need at least 2 samples to split, got {0}")]
    TooFewSamples(usize),

    #[error("score file does not match dataset: {0}")]
    ScoreMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
