use std::path::PathBuf;

use crate::model::ActivationKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{op} requires a {expected} network, got {got}")]
    WrongActivation {
        op: &'static str,
        expected: ActivationKind,
        got: ActivationKind,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("signed permutation rejected: {0}")]
    InvalidPermutation(String),

    #[error("gradient-sparsity penalty needs the design matrix")]
    MissingDesign,

    /// Objective blew up; the trajectory recorded so far is attached.
    #[error("training diverged at iteration {iteration} (objective {objective})")]
    Diverged {
        iteration: usize,
        objective: f64,
        trajectory: Vec<(usize, f64)>,
    },

    #[error("experiment result is empty")]
    EmptyResult,

    #[error("missing grid cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than a failed computation or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::WrongActivation { .. }
                | Error::NonFinite(_)
                | Error::InvalidConfig(_)
                | Error::InvalidPermutation(_)
                | Error::MissingDesign
                | Error::Parse { .. }
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
