// SPDX-License-Identifier: Apache-2.0

//! Seeded random streams. Every random choice in the crate draws from a
//! [`SimRng`] created here, so a single `u64` seed fixes a whole run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th member of `stream`, independent of evaluation order.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    mix(mix(seed ^ mix(stream)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: u64, index: u64) -> SimRng {
    rng_from_seed(derive_seed(seed, stream, index))
}
