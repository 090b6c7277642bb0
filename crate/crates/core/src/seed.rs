//! Sub-seed derivation. Every random stream in the toolkit descends from one
//! user seed through these helpers.

use sha2::{Digest, Sha256};

/// Deterministic sub-seed for a named stream.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stream.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Sub-seed for an indexed stream, e.g. one per epoch.
pub fn derive_indexed(seed: u64, stream: &str, index: u64) -> u64 {
    derive_seed(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15), stream)
}
