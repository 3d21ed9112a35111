// SPDX-License-Identifier: Apache-2.0

//! Reputation-driven sharded committee protocol: data model, committee
//! formation and reshuffling, reputation scoring, the per-round committee
//! protocol, security analysis and a round-based simulator.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

#[cfg(feature = "std")]
extern crate std;

extern crate alloc;

pub mod committee;
pub mod digest;
pub mod error;
pub mod model;
pub mod reputation;
pub mod reshuffle;
pub mod rng;
pub mod security;
pub mod shard;
pub mod sim;

pub use digest::{sha256, Digest};
pub use error::{Error, Result};
pub use model::{Committee, CommitteeConfig, Node, NodeId, SignatureRegistry, SimSignature, SystemParams, Transaction};
