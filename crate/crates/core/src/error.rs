use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input; `location` names the file and record (or line) at fault.
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown slot `{0}`")]
    UnknownSlot(String),

    #[error("unknown dialogue `{0}`")]
    UnknownDialogue(String),

    #[error("turn {turn} out of range for dialogue `{dialogue_id}` with {n_turns} turns")]
    TurnOutOfRange {
        dialogue_id: String,
        turn: usize,
        n_turns: usize,
    },

    #[error("cannot build an explanation from an empty chain")]
    EmptyChain,

    #[error("generation is empty")]
    EmptyGeneration,

    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),

    #[error("invalid bucket spec: {0}")]
    InvalidBucketSpec(String),

    #[error("duplicate prediction for ({dialogue_id}, turn {turn}, {slot_id})")]
    DuplicatePrediction {
        dialogue_id: String,
        turn: usize,
        slot_id: String,
    },

    #[error("invalid sampling fraction {0}; expected a value in (0, 1]")]
    InvalidFraction(f64),

    #[error("network error: {0}")]
    Network(String),

    #[error("authentication error: {0}")]
    Auth(String),

    #[error("completion was empty")]
    EmptyCompletion,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(location: impl Into<String>, message: impl ToString) -> Self {
        Error::Format {
            location: location.into(),
            message: message.to_string(),
        }
    }
}
