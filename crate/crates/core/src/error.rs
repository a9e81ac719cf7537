use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("target id {id} out of range for {classes} classes")]
    TargetOutOfRange { id: usize, classes: usize },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss in batch {0}")]
    NonFiniteLoss(usize),

    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("sequence of length {0} is too short (need at least 2 tokens)")]
    SequenceTooShort(usize),

    #[error("context overflow: {needed} tokens requested, context length is {context_len}")]
    ContextOverflow { needed: usize, context_len: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("experiment {experiment} requires a {resource}")]
    MissingResource {
        experiment: u8,
        resource: &'static str,
    },

    #[error("insufficient corpus: {required} items required, {available} available")]
    InsufficientCorpus { required: usize, available: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("run record schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("self-test failed: {0}")]
    SelfTest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Whether the error stems from user configuration rather than a failure
    /// during execution.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::MissingResource { .. }
                | Error::Parse { .. }
                | Error::File { .. }
                | Error::InsufficientCorpus { .. }
                | Error::SchemaVersion { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
