//! Seed derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a 64-bit
//! value. Child seeds are derived by folding a list of integer labels into the
//! parent with the SplitMix64 finaliser, so a trial's randomness depends only
//! on `(master, cell, trial, purpose)` and never on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `parent` and an ordered list of labels.
pub fn derive(parent: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(mix64(parent), |acc, &label| mix64(acc ^ mix64(label)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Labels used to separate the random streams of one trial or pipeline.
pub mod stream {
    pub const RECIPIENT: u64 = 1;
    pub const LAYOUT: u64 = 2;
    pub const OVERLAP: u64 = 3;
    pub const ORIGINAL: u64 = 4;
    pub const COALITION: u64 = 5;
    pub const ATTACK: u64 = 6;
    pub const SHARING: u64 = 7;
    pub const MODEL: u64 = 8;
}
