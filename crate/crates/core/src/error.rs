use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DsmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DsmError {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("hour {hour} is outside 1..={horizon}")]
    HourOutOfRange { hour: usize, horizon: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("game table too large: {product} joint actions exceeds cap {cap}")]
    TableTooLarge { product: u128, cap: usize },

    #[error("action {action} is not in the action set of player {player}")]
    UnknownAction { player: usize, action: usize },

    #[error("probability vector for player {player} is not on the simplex: {reason}")]
    NotOnSimplex { player: usize, reason: String },

    #[error("csv {path}: {reason}")]
    Csv { path: PathBuf, reason: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<DsmError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl DsmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DsmError::Invalid(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        DsmError::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DsmError::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether this error (or the error it wraps) stems from I/O rather than invalid input.
    pub fn is_io(&self) -> bool {
        match self {
            DsmError::Io { .. } => true,
            DsmError::Stage { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| DsmError::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
