use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("duplicate entry id `{0}`")]
    DuplicateId(String),
    #[error("invalid split ratios: {0}")]
    InvalidSplit(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("dataset needs at least two distinct labels")]
    SingleClass,
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("label `{0}` is not among the prediction labels")]
    UnknownLabel(String),
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("unknown body region `{0}`")]
    UnknownRegion(String),
    #[error("region `{region}` is not visible on the {side} view")]
    RegionNotOnSide { region: String, side: String },
    #[error("malformed lexicon: {0}")]
    MalformedLexicon(String),
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("session is awaiting a topic confirmation")]
    AwaitingConfirmation,
    #[error("session is not awaiting a confirmation")]
    NotAwaitingConfirmation,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
