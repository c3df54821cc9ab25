use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PmmsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PmmsError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error on line {line}: {msg}")]
    Validation { line: usize, msg: String },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("unstable queue: arrival rate {arrival} >= service rate {service}")]
    UnstableQueue { arrival: f64, service: f64 },

    #[error(transparent)]
    Reservation(#[from] crate::reservation::ReservationError),

    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl PmmsError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        PmmsError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PmmsError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            PmmsError::Config(_) | PmmsError::Parse { .. } | PmmsError::Validation { .. }
        )
    }
}
