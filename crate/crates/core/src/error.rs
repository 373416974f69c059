use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by corpus ingestion, model training, scoring and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A CSV row with a different field count than the first row.
    #[error("{path}:{line}: row has {found} fields, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    /// A CSV field that does not parse as a non-negative integer.
    #[error("{path}:{line}:{column}: invalid integer field {field:?}")]
    FieldParse {
        path: PathBuf,
        line: usize,
        column: usize,
        field: String,
    },

    #[error("{path}: empty input")]
    EmptyInput { path: PathBuf },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An observation symbol outside the model vocabulary, with its
    /// zero-based position in the offending sequence.
    #[error("symbol {symbol} at position {position} is outside the vocabulary (size {vocab})")]
    SymbolOutOfVocab {
        position: usize,
        symbol: u32,
        vocab: usize,
    },

    /// Model file that is not parseable as the expected JSON document.
    #[error("model file format error: {0}")]
    ModelFormat(String),

    /// Model file with a format version this build does not understand.
    #[error("unsupported model format version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    /// Parseable model file whose contents violate the model invariants
    /// (non-stochastic rows, negative entries, dimension mismatches).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("similarity cache format error: {0}")]
    CacheFormat(String),

    /// A numeric failure (overflow/underflow to non-finite values).
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// A ranking handed to the evaluator contained repeated items.
    #[error("ranking contains duplicate items")]
    DuplicateItems,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
