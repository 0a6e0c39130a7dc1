use thiserror::Error;

/// Errors produced by profile construction, ingestion, and analysis.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate metric `{0}`")]
    DuplicateMetric(String),

    #[error("expected {expected} metric values, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("sample stack is empty")]
    EmptyStack,

    #[error("frame has neither a function name nor an address")]
    InvalidFrame,

    #[error("node {0} does not exist")]
    UnknownNode(usize),

    #[error("malformed input at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("unrecognized profile format")]
    UnknownFormat,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("frame `{0}` cannot be written in folded format")]
    FoldedFrame(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("metric `{0}` does not support this analysis")]
    UnknownMetricSemantics(String),

    #[error("cannot merge: {0}")]
    Merge(String),

    #[error("invalid directive: {0}")]
    Directive(String),

    #[error("{name} {value} is out of range")]
    Range { name: &'static str, value: f64 },

    #[error("search query is empty")]
    EmptyQuery,

    #[error("metric `{metric}` is missing from profile {profile}")]
    MetricMismatch { metric: String, profile: String },

    #[error("no profiles given")]
    NoProfiles,

    #[error("path `{0}` does not exist")]
    UnknownPath(String),

    #[error("role `{0}` does not occur in any monitoring point")]
    UnknownRole(String),

    #[error("formula error at position {position}: {message}")]
    Formula { position: usize, message: String },

    #[error("callback failed at `{path}`: {message}")]
    Callback { path: String, message: String },

    #[error("unknown callback handle {0}")]
    UnknownHandle(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
