// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;

use crate::model::NodeId;

/// Errors returned by the protocol and analysis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("not enough eligible nodes: need {needed}, have {available}")]
    InsufficientNodes { needed: usize, available: usize },
    #[error("malformed message: {0}")]
    Malformed(&'static str),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
