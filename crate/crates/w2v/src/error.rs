//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("read error in {} at byte {offset}", path.display())]
    CorpusRead {
        path: PathBuf,
        offset: u64,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid UTF-8 token in {} at byte {offset}", path.display())]
    InvalidToken { path: PathBuf, offset: u64 },

    #[error("empty vocabulary: no token appears at least {min_count} times")]
    EmptyVocabulary { min_count: u64 },

    #[error("malformed vocabulary file {} at line {line}: {reason}", path.display())]
    VocabFormat {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("negative-sample table size {table_size} is smaller than the vocabulary ({vocab_size} words)")]
    TableTooSmall {
        table_size: usize,
        vocab_size: usize,
    },

    #[error("malformed vector file {} at byte {offset}: {reason}", path.display())]
    VectorFormat {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("malformed evaluation file {} at line {line}: {reason}", path.display())]
    EvalFormat {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("rank correlation needs at least two scored pairs, got {got}")]
    TooFewPairs { got: usize },

    #[error("rank correlation is undefined: {0}")]
    DegenerateRanks(String),

    #[error("replica shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
