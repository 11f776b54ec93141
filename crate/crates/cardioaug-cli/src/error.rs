//! CLI-level errors with process exit codes.
//!
//! Exit codes: 0 success, 1 validation error (bad manifest, config, or
//! arguments), 2 partial processing failure (some work items failed, the run
//! continued), 3 check-suite failure (`losscheck`/`bench` below target).

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{failed} of {total} work items failed; see the provenance log for details")]
    Partial { failed: usize, total: usize },

    #[error("{0}")]
    CheckFailure(String),

    #[error(transparent)]
    Core(#[from] cardioaug::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Partial { .. } => 2,
            CliError::CheckFailure(_) => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn decode(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Decode {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_failure_class() {
        assert_eq!(CliError::Validation("x".into()).exit_code(), 1);
        assert_eq!(CliError::Partial { failed: 1, total: 3 }.exit_code(), 2);
        assert_eq!(CliError::CheckFailure("x".into()).exit_code(), 3);
        assert_eq!(
            CliError::Core(cardioaug::Error::BackgroundClass).exit_code(),
            1
        );
    }
}
