use std::path::PathBuf;

/// Errors produced by the augmentation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rotation log is singular: angle {angle:.6} rad is at or near pi")]
    NearSingular { angle: f64 },

    #[error("model error in `{entity}`: {reason}")]
    Model { entity: String, reason: String },

    #[error("clip error{}: {reason}", frame.map(|f| format!(" at frame {f}")).unwrap_or_default())]
    Clip {
        frame: Option<usize>,
        reason: String,
    },

    #[error("configuration width mismatch: expected {expected} joint values, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("unknown link `{0}`")]
    UnknownLink(String),

    #[error("IK solver diverged: {0}")]
    SolverDiverged(String),

    #[error("infeasible noise budget: k_min = {k_min} N/m >= k_max = {k_max} N/m")]
    InfeasibleBudget { k_min: f64, k_max: f64 },

    #[error("schema version mismatch in {path}: expected {expected}, found {found}")]
    SchemaVersion {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("trajectory length mismatch: {0} vs {1} frames")]
    LengthMismatch(usize, usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn model(entity: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Model {
            entity: entity.into(),
            reason: reason.into(),
        }
    }
}
