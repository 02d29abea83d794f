use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file contains no lines")]
    EmptyFile { path: PathBuf },

    #[error("{path}:{line}: duplicate line id `{id}`")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("texts share no line ids")]
    EmptyIntersection,

    #[error("need at least {needed} texts, got {got}")]
    TooFewTexts { needed: usize, got: usize },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("split `{name}` would receive 0 of {total} lines")]
    EmptySplit { name: String, total: usize },

    #[error("no usable sentence pairs ({skipped} skipped as empty)")]
    NoSentencePairs { skipped: usize },

    #[error("source and target line counts differ ({source_lines} vs {target_lines})")]
    BitextMismatch {
        source_lines: usize,
        target_lines: usize,
    },

    #[error("hypothesis/reference count mismatch ({hypotheses} vs {references})")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },

    #[error("cannot score an empty set of sentences")]
    EmptyEvaluation,

    #[error("no aligned source tokens; distortion score is undefined")]
    NoAlignedTokens,

    #[error("ranking has {available} languages but a family of {requested} was requested; supply an explicit FAMO+ list instead")]
    FamilyTooSmall { requested: usize, available: usize },

    #[error("language `{0}` is not present in the corpus view")]
    MissingLanguage(String),

    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    #[error("language `{language}` is missing {count} line id(s) of the low-resource data, first: {first}")]
    MissingLines {
        language: String,
        count: usize,
        first: String,
    },

    #[error("ragged translation files: line id `{line_id}` {problem}")]
    Ragged { line_id: String, problem: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
