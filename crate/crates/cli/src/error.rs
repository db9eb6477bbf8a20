use gaussperc_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("resource budget exceeded: {0}")]
    Budget(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn validation(field: &str, reason: &str) -> Self {
        HarnessError::Validation {
            field: field.to_string(),
            reason: reason.to_string(),
        }
    }

    /// Process exit code per the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation { .. } => 2,
            HarnessError::Budget(_) => 3,
            HarnessError::Runtime(_) => 4,
        }
    }
}

impl From<CoreError> for HarnessError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Invalid { field, reason } => HarnessError::Validation { field, reason },
            CoreError::Budget(msg) => HarnessError::Budget(msg),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}
