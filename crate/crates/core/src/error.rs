use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value or shape is inconsistent with what an operation needs.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input outside the mathematical domain of a feature or statistic.
    #[error("domain error: {0}")]
    Domain(String),

    /// API misuse (non-scalar loss, empty matrix, missing checkpoint...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("input error: missing files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),

    #[error("input error: {path}:{line}: {msg}")]
    Malformed {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("input error: {0}")]
    Input(String),

    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch} (lr {lr:e}, last finite loss {last_finite:?})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        lr: f64,
        last_finite: Option<f64>,
    },

    #[error("io error: {context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Stable code printed as a prefix by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "E-CONFIG",
            Error::Domain(_) => "E-DOMAIN",
            Error::Usage(_) => "E-USAGE",
            Error::MissingFiles(_) | Error::Malformed { .. } | Error::Input(_) => "E-INPUT",
            Error::NonFiniteLoss { .. } => "E-TRAIN",
            Error::Io { .. } => "E-IO",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
