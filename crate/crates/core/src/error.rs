use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or image shapes that do not fit together.
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("invalid target for {op}: {detail}")]
    InvalidTarget { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file content. `location` is a line number for text files
    /// and a byte offset for binary ones.
    #[error("{}:{location}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        location: String,
        msg: String,
    },

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training: {0}")]
    Training(String),
}

impl Error {
    /// Short stable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidTarget { .. } => "invalid_target",
            Error::Config(_) => "config",
            Error::SchemaMismatch(_) => "schema_mismatch",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "format",
            Error::MissingFile(_) => "missing_file",
            Error::Checkpoint(_) => "format",
            Error::Training(_) => "training",
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::MissingFile(_) => 3,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
            Error::SchemaMismatch(_) => 4,
            Error::Parse { .. } | Error::Checkpoint(_) => 5,
            _ => 1,
        }
    }

    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        location: impl ToString,
        msg: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            location: location.to_string(),
            msg: msg.into(),
        }
    }
}
