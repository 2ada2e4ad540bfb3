use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dataset has no examples")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("clustering: {0}")]
    Clustering(String),

    #[error("cluster {0} has no members")]
    EmptyCluster(usize),

    #[error("iteration {t} outside schedule of {total} iterations")]
    IterationOutOfRange { t: usize, total: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("column {0} has no observed values")]
    ColumnAllMissing(usize),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("repeat {repeat}, fold {fold}: {source}")]
    Fold {
        repeat: usize,
        fold: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) => ErrorKind::Config,
            Error::EmptyDataset
            | Error::LabelOutOfRange { .. }
            | Error::ColumnAllMissing(_)
            | Error::Parse { .. }
            | Error::Io { .. } => ErrorKind::Data,
            Error::Fold { source, .. } => source.kind(),
            Error::DimensionMismatch { .. }
            | Error::Clustering(_)
            | Error::EmptyCluster(_)
            | Error::IterationOutOfRange { .. } => ErrorKind::Runtime,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Runtime => 3,
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
