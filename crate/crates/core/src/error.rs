use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input text. `line`/`column` are 1-based when known.
    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("non-finite value in episode {episode}, timestep {timestep}: {field}")]
    NonFinite {
        episode: usize,
        timestep: usize,
        field: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("unknown neuron `{0}`")]
    UnknownNeuron(String),

    #[error("unknown decision path {path} (tree has {count} paths)")]
    UnknownPath { path: usize, count: usize },

    #[error("metric `{metric}` is undefined: {reason}")]
    UndefinedMetric {
        metric: &'static str,
        reason: String,
    },

    #[error("empty input: {0}")]
    Empty(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the content of user-supplied data rather than a
    /// bug or an unusable configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Schema(_)
                | Error::NonFinite { .. }
                | Error::Dimension { .. }
                | Error::Empty(_)
        )
    }
}
