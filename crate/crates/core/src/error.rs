use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("eigendecomposition did not converge after {0} sweeps")]
    EigenFailure(usize),

    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("covariance matrix is singular; use a positive ridge")]
    SingularCovariance,

    #[error("within-class scatter is singular; use a positive ridge")]
    SingularScatter,

    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),

    #[error("views are not aligned: {0}")]
    Alignment(String),

    #[error("parse error in {path} at row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: u64,
        message: String,
    },

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid permutation plan: {0}")]
    InvalidPlan(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    TrainingDiverged { epoch: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::InvalidShape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool. Each variant maps to a
    /// distinct non-zero value.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidShape(_) => 10,
            Error::NotSymmetric(_) => 11,
            Error::EigenFailure(_) => 12,
            Error::NotPsd(_) => 13,
            Error::SingularCovariance => 14,
            Error::SingularScatter => 15,
            Error::InvalidSpec(_) => 20,
            Error::Alignment(_) => 21,
            Error::Parse { .. } => 22,
            Error::InvalidLabels(_) => 30,
            Error::InvalidParameter(_) => 31,
            Error::InvalidPlan(_) => 32,
            Error::InvalidState(_) => 40,
            Error::Config(_) => 41,
            Error::TrainingDiverged { .. } => 42,
            Error::Io { .. } => 50,
            Error::Json(_) => 51,
        }
    }
}
