use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("unknown word: {0}")]
    UnknownWord(String),

    #[error("vocabulary/store mismatch for {word:?}: vocabulary says {expected}, corpus has {found}")]
    VocabularyMismatch { word: String, expected: u64, found: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corpus has no tokens eligible for topic modelling")]
    NoEligibleTokens,

    #[error("degenerate aggregate: input vectors sum to zero")]
    DegenerateAggregate,

    #[error("empty relevant-topic set for {0:?}")]
    EmptyRelevantTopics(String),

    #[error("missing vector for mention {0}")]
    MissingVector(u64),

    #[error("dangling mention reference {mention_id}: {reason}")]
    DanglingMention { mention_id: u64, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated data: {0}")]
    Truncated(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("empty matrix")]
    EmptyMatrix,
}
