use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("resource budget exceeded: {0}")]
    Budget(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn invalid(field: &str, reason: &str) -> Self {
        CoreError::Invalid { field: field.to_string(), reason: reason.to_string() }
    }
}
