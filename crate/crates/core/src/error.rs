//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Physics,
    Fit,
    Ingest,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Physics => 3,
            ErrorKind::Fit => 4,
            ErrorKind::Ingest => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid medium: {0}")]
    InvalidMedium(String),

    #[error("invalid frequency {0} Hz: must be positive and finite")]
    InvalidFrequency(f64),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("invalid angle sweep: {0}")]
    InvalidSweep(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("model incomplete: {0}")]
    ModelIncomplete(String),

    #[error("analytic depth model not applicable: {0}")]
    AnalyticModelInapplicable(String),

    #[error("fit underdetermined: {0}")]
    FitUnderdetermined(String),

    #[error("empty power trace")]
    EmptyTrace,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unconfigured: {0}")]
    Unconfigured(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{file}: row {row}: {message}")]
    Format {
        file: String,
        row: usize,
        message: String,
    },

    #[error("{file}: {message}")]
    Ingest { file: String, message: String },

    #[error("unknown artifact: {0}")]
    UnknownArtifact(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidMedium(_)
            | Error::InvalidFrequency(_)
            | Error::InvalidScene(_)
            | Error::ModelIncomplete(_)
            | Error::AnalyticModelInapplicable(_)
            | Error::EmptyTrace => ErrorKind::Physics,
            Error::FitUnderdetermined(_) => ErrorKind::Fit,
            Error::DimensionMismatch(_)
            | Error::Format { .. }
            | Error::Ingest { .. }
            | Error::Io { .. } => ErrorKind::Ingest,
            Error::InvalidGrid(_)
            | Error::InvalidSweep(_)
            | Error::Unconfigured(_)
            | Error::Config { .. }
            | Error::UnknownArtifact(_) => ErrorKind::Config,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
