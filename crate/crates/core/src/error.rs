//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]. Variants are deliberately
//! fine-grained so callers (the CLI in particular) can map each failure to a
//! stable machine-readable code via [`Error::code`].

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two vectors that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A dimension count of zero where at least one is required.
    #[error("dimension must be at least 1")]
    ZeroDimension,

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// A variance entry is zero, negative, NaN or infinite.
    #[error("variance entry {index} is {value}, must be strictly positive and finite")]
    InvalidVariance { index: usize, value: f64 },

    /// An ingested variance entry sits below the accepted floor. Rejected
    /// rather than clamped: clamping would silently change scores.
    #[error("variance entry {index} is {value}, below the ingestion floor {floor}")]
    VarianceBelowFloor { index: usize, value: f64, floor: f64 },

    /// The log-sum of variances is outside the guard band inside which the
    /// exponentiated variance product stays representable.
    #[error("variance log-sum {log_sum} exceeds the representable guard band +/-{limit}")]
    LogSumOutOfRange { log_sum: f64, limit: f64 },

    /// Two documents with the same identifier were offered to an index.
    #[error("duplicate document id: {0}")]
    DuplicateId(String),

    /// An index or corpus operation needs at least one document.
    #[error("empty corpus")]
    EmptyCorpus,

    /// Paired slices have different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A rank vector is not a permutation of 1..=n.
    #[error("rank vector is not a permutation of 1..={0}")]
    NotAPermutation(usize),

    /// Too few items for the requested statistic.
    #[error("need at least {required} items, got {actual}")]
    TooFewItems { required: usize, actual: usize },

    /// Pearson correlation of a constant sequence is undefined.
    #[error("correlation undefined: input sequence is constant")]
    ConstantInput,

    /// A training step produced a non-finite loss or gradient.
    #[error("training diverged at step {step}: {detail}")]
    TrainingDiverged { step: u64, detail: String },

    /// A run file references a query missing from the qrels.
    #[error("run contains query {0} absent from qrels")]
    UnknownQuery(String),

    /// A text input (JSONL, TREC run/qrels, TSV) failed to parse.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// A parsed record violates a domain invariant.
    #[error("invalid record {id}: {message}")]
    InvalidRecord { id: String, message: String },

    /// An index file does not start with the expected magic bytes.
    #[error("bad index magic: expected \"MVNR\", got {found:?}")]
    BadMagic { found: [u8; 4] },

    /// An index file has an unsupported format version.
    #[error("unsupported index version {found}, expected {expected}")]
    UnsupportedVersion { found: u16, expected: u16 },

    /// An index file ended before the declared contents.
    #[error("index file truncated: needed {needed} more bytes in {section}")]
    Truncated { section: &'static str, needed: usize },

    /// An index file has bytes past the declared contents.
    #[error("index file has {0} trailing bytes past the declared contents")]
    TrailingBytes(usize),

    /// An index file field holds an impossible value.
    #[error("corrupt index field {field}: {detail}")]
    CorruptField { field: &'static str, detail: String },

    /// A configuration value fails validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used by the CLI as an error prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "E_DIM",
            Error::ZeroDimension => "E_DIM",
            Error::NonFinite { .. } => "E_NONFINITE",
            Error::InvalidVariance { .. } => "E_VARIANCE",
            Error::VarianceBelowFloor { .. } => "E_VARIANCE_FLOOR",
            Error::LogSumOutOfRange { .. } => "E_RANGE",
            Error::DuplicateId(_) => "E_DUP_ID",
            Error::EmptyCorpus => "E_EMPTY",
            Error::LengthMismatch { .. } => "E_LEN",
            Error::NotAPermutation(_) => "E_PERM",
            Error::TooFewItems { .. } => "E_LEN",
            Error::ConstantInput => "E_CONST",
            Error::TrainingDiverged { .. } => "E_DIVERGED",
            Error::UnknownQuery(_) => "E_UNKNOWN_QUERY",
            Error::Parse { .. } => "E_PARSE",
            Error::InvalidRecord { .. } => "E_RECORD",
            Error::BadMagic { .. } => "E_MAGIC",
            Error::UnsupportedVersion { .. } => "E_VERSION",
            Error::Truncated { .. } => "E_TRUNCATED",
            Error::TrailingBytes(_) => "E_TRAILING",
            Error::CorruptField { .. } => "E_CORRUPT",
            Error::InvalidConfig(_) => "E_CONFIG",
            Error::Io(_) => "E_IO",
        }
    }
}
