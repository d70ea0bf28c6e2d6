use thiserror::Error;

use crate::model::AnnotationEvent;
use crate::state::ReplayError;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0} not found")]
    NotFound(String),
    /// Stale version; carries the latest stored event.
    #[error("version conflict: expected version {expected}")]
    Conflict {
        expected: u64,
        latest: Option<Box<AnnotationEvent>>,
    },
    #[error("not authorized: {0}")]
    Unauthorized(String),
    #[error("pool has {available} sentence(s), {requested} requested")]
    InsufficientPool { requested: usize, available: usize },
    #[error("locked: {0}")]
    Locked(String),
    #[error("a rationale is required: {0}")]
    RationaleRequired(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

impl ServiceError {
    /// Short machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict { .. } => "conflict",
            ServiceError::Unauthorized(_) => "unauthorized",
            ServiceError::InsufficientPool { .. } => "insufficient_pool",
            ServiceError::Locked(_) => "locked",
            ServiceError::RationaleRequired(_) => "rationale_required",
            ServiceError::Invalid(_) => "invalid",
            ServiceError::Io(_) | ServiceError::Json(_) | ServiceError::Replay(_) => "internal",
        }
    }
}
