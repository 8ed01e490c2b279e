use std::path::{Path, PathBuf};

use serde::Serialize;

/// Exit code 1: bad input, bad flags or a missing artifact.
/// Exit code 2: anything else.
#[derive(Debug)]
pub enum CliError {
    User {
        message: String,
        missing: Option<PathBuf>,
        produced_by: Option<&'static str>,
    },
    Internal(anyhow::Error),
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'static str,
    exit_code: i32,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    missing: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    produced_by: Option<&'static str>,
}

impl CliError {
    pub fn user(message: impl Into<String>) -> Self {
        CliError::User {
            message: message.into(),
            missing: None,
            produced_by: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User { .. } => 1,
            CliError::Internal(_) => 2,
        }
    }

    /// Single-line JSON for stderr.
    pub fn record(&self) -> String {
        let internal;
        let (kind, message, missing, produced_by) = match self {
            CliError::User {
                message,
                missing,
                produced_by,
            } => ("user", message.as_str(), missing.as_ref(), *produced_by),
            CliError::Internal(e) => {
                internal = format!("{e:#}");
                ("internal", internal.as_str(), None, None)
            }
        };
        let record = ErrorRecord {
            error: ErrorBody {
                kind,
                exit_code: self.exit_code(),
                message,
                missing: missing.map(|p| p.display().to_string()),
                produced_by,
            },
        };
        serde_json::to_string(&record).expect("error records serialize")
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Internal(e)
    }
}

/// Fails with a user error naming the file and the command that produces it.
pub fn require(path: &Path, produced_by: &'static str) -> Result<(), CliError> {
    if path.exists() {
        return Ok(());
    }
    Err(CliError::User {
        message: format!("missing artifact {}; produce it with `e2s {produced_by}`", path.display()),
        missing: Some(path.to_path_buf()),
        produced_by: Some(produced_by),
    })
}

/// Fails with a user error for a missing user-supplied input.
pub fn require_input(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        return Ok(());
    }
    Err(CliError::User {
        message: format!("input file {} does not exist", path.display()),
        missing: Some(path.to_path_buf()),
        produced_by: None,
    })
}

/// Maps any displayable error on user input to a user error.
pub trait UserContext<T> {
    fn user_err(self) -> Result<T, CliError>;
}

impl<T, E: std::fmt::Display> UserContext<T> for Result<T, E> {
    fn user_err(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::user(e.to_string()))
    }
}
