use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scene generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: u32, reason: String },

    #[error("no valid task found after {0} attempts")]
    SamplingExhausted(u32),

    #[error("point ({x:.3}, {y:.3}) is not traversable")]
    NotTraversable { x: f64, y: f64 },

    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("non-finite loss ({loss}) at {stage}")]
    NonFiniteLoss { stage: String, loss: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
