use std::path::PathBuf;

/// Errors produced by the evaluation harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line count mismatch: {}", format_counts(.0))]
    LineCountMismatch(Vec<(PathBuf, usize)>),

    #[error("{path}: invalid UTF-8 on line {line}")]
    Decode { path: PathBuf, line: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    #[error("invalid evaluation set: {0}")]
    InvalidEvalSet(String),

    #[error("cannot aggregate an empty score table")]
    EmptyTable,

    #[error("score table misaligned with evaluation set: expected {expected} segments, got {got}")]
    Misaligned { expected: usize, got: usize },

    #[error("non-finite score {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("language profile corpus for '{0}' is empty")]
    EmptyCorpus(String),

    #[error("no language profile for expected language '{0}'")]
    MissingProfile(String),

    #[error("requests mix reference-based and reference-free inputs")]
    MixedMode,

    #[error("precomputed score table has no entry for index {0}")]
    MissingIndex(usize),

    #[error("external scorer exited with {status}; stderr:\n{stderr}")]
    ExternalFailed { status: String, stderr: String },

    #[error("external scorer output line {line}: {message}")]
    ExternalOutput { line: usize, message: String },

    #[error("{0}")]
    Strategy(String),

    #[error("system sets differ between rankings: {0}")]
    SystemMismatch(String),

    #[error("duplicate system name '{0}'")]
    DuplicateSystem(String),

    #[error("signature field {field} must not contain '|': {value:?}")]
    SignatureField { field: &'static str, value: String },

    #[error("malformed signature: {0}")]
    MalformedSignature(String),

    #[error("unknown model '{query}'; nearest known: {}", .suggestions.join(", "))]
    UnknownModel {
        query: String,
        suggestions: Vec<String>,
    },

    #[error("citation database: {0}")]
    CitationDb(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn format_counts(counts: &[(PathBuf, usize)]) -> String {
    counts
        .iter()
        .map(|(p, n)| format!("{} has {} lines", p.display(), n))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
