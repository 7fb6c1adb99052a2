use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments or configuration supplied by the caller.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data violates a precondition (shape, finiteness, ...).
    #[error("input fault: {0}")]
    Input(String),

    /// Non-finite plant state after an Euler update.
    #[error("simulation fault at step {step}: {reason}")]
    Simulation { step: usize, reason: String },

    #[error("calibration fault: {0}")]
    Calibration(String),

    #[error("numerical fault: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 data fault, 3 numerical fault.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Input(_) | Error::Io { .. } | Error::Json { .. } | Error::Csv(_) => 2,
            Error::Simulation { .. } | Error::Calibration(_) | Error::Numerical(_) => 3,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
