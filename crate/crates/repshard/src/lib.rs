// SPDX-License-Identifier: Apache-2.0

//! File formats, configuration, parallel drivers and the command-line front
//! end for `repshard-core`.

pub mod cli;
pub mod config;
pub mod drivers;
pub mod error;
pub mod formats;

pub use error::{AppError, Result};
pub use repshard_core as core;
