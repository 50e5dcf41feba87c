use thiserror::Error;

use crate::dupire_lv::LocalVolSurface;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("data error: {0}")]
    Data(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("calendar error: {0}")]
    Calendar(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerics(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter error: {0}")]
    Param(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// Local-volatility fit missed its tolerance; carries the best surface found.
    #[error("calibration error: {message}")]
    Calibration {
        message: String,
        best: Option<Box<LocalVolSurface>>,
        residuals: Vec<f64>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerics(msg: impl Into<String>) -> Self {
        Error::Numerics(msg.into())
    }

    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub fn calibration(msg: impl Into<String>) -> Self {
        Error::Calibration {
            message: msg.into(),
            best: None,
            residuals: Vec::new(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Data(_)
            | Error::Range(_)
            | Error::Calendar(_)
            | Error::Param(_)
            | Error::Io { .. } => 2,
            Error::Numerics(_) | Error::Domain(_) => 3,
            Error::Calibration { .. } => 4,
            Error::Usage(_) | Error::Config(_) => 64,
        }
    }
}
