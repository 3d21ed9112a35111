// SPDX-License-Identifier: Apache-2.0

use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Exit status for usage and configuration problems.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for failures writing outputs.
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("{}: {reason}", path.display())]
    Input { path: PathBuf, reason: String },
    #[error("{}: row {row}: {reason}", path.display())]
    Row { path: PathBuf, row: u64, reason: String },
    #[error("{}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Output { .. } => EXIT_IO,
            _ => EXIT_USAGE,
        }
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        AppError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn output(path: impl Into<PathBuf>, source: io::Error) -> Self {
        AppError::Output {
            path: path.into(),
            source,
        }
    }
}

impl From<repshard_core::Error> for AppError {
    fn from(e: repshard_core::Error) -> Self {
        match e {
            repshard_core::Error::InvalidParameter { field, reason } => AppError::config(field, reason),
            other => AppError::Usage(other.to_string()),
        }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
