use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed chord label {label:?}: {reason}")]
    MalformedLabel { label: String, reason: String },

    #[error("unknown chord class string {0:?}")]
    UnknownClassString(String),

    #[error("{song}: line {line}: {source}")]
    InSong {
        song: String,
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: line {line}: {reason}")]
    ParseError {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: line {line}: timestamps are not monotonic")]
    NonMonotonicTimestamps { path: PathBuf, line: usize },

    #[error("{0}: song contains no chord events")]
    EmptySong(String),

    #[error("dataset {dataset:?} has only {count} songs; at least 3 are needed to split it")]
    StratumTooSmall { dataset: String, count: usize },

    #[error("song id {0:?} appears more than once")]
    DuplicateSongId(String),

    #[error("n-gram order must be in 1..=6, got {0}")]
    InvalidOrder(usize),

    #[error("context has {got} tokens but the model needs {needed}")]
    ContextLength { needed: usize, got: usize },

    #[error("distribution undefined: context never observed and alpha is 0")]
    UndefinedDistribution,

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite activation at step {step}: {detail}")]
    NonFiniteActivation { step: usize, detail: String },

    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    DivergedRun { epoch: usize, detail: String },

    #[error("no best checkpoint available to resume from")]
    MissingCheckpoint,

    #[error("objective failed: {0}")]
    ObjectiveFailure(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("no song has at least {0} chords")]
    NoEligibleSongs(usize),

    #[error("need at least 2 songs, got {0}")]
    TooFewSongs(usize),

    #[error("score lists are not aligned by song id: {0}")]
    MisalignedSongs(String),

    #[error("vocabulary mismatch: model {model} vs corpus {corpus}")]
    VocabularyMismatch { model: String, corpus: String },

    #[error("unsupported file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_song(self, song: &str, line: usize) -> Self {
        Error::InSong {
            song: song.to_string(),
            line,
            source: Box::new(self),
        }
    }
}
