use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("audio {locator}: {reason}")]
    Audio { locator: String, reason: String },

    #[error("sample rate mismatch: backend expects {expected} Hz, waveform is {found} Hz (resample first)")]
    SampleRateMismatch { expected: u32, found: u32 },

    #[error("channel {0} not present in waveform")]
    MissingChannel(&'static str),

    #[error("backend '{backend_id}' is not installed: {detail}")]
    BackendNotInstalled { backend_id: String, detail: String },

    #[error("backend '{backend_id}' failed to load: {detail}")]
    BackendLoadFailed { backend_id: String, detail: String },

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("feature kind mismatch: {0} vs {1}")]
    KindMismatch(String, String),

    #[error("no overlapping frames after alignment")]
    EmptyOverlap,

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("non-finite loss on utterance {utterance_id}")]
    NonFiniteLoss { utterance_id: String },

    #[error("feature cache is missing entries ({0}); run `sipred extract` first")]
    MissingFeatures(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("feature cache entry: {0}")]
    Cache(String),

    #[error("predictions without matching records: {0:?}")]
    UnmatchedPredictions(Vec<String>),

    #[error("configuration: {0}")]
    Config(String),

    #[error("utterance {utterance_id}: {source}")]
    Utterance {
        utterance_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn with_utterance(self, utterance_id: &str) -> Self {
        Error::Utterance {
            utterance_id: utterance_id.to_string(),
            source: Box::new(self),
        }
    }
}
