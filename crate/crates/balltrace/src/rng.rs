//! Deterministic RNG derivation.
//!
//! Every stochastic subsystem (match simulation, crop synthesis, masking,
//! parameter init, batch order, dropout) owns a ChaCha8 stream derived from
//! the user seed plus a purpose tag and indices, so the same seed replays
//! bitwise regardless of evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keeping subsystems decorrelated under a shared user seed.
pub(crate) mod stream {
    pub const MOTION: u64 = 1;
    pub const CROPS: u64 = 2;
    pub const MASK: u64 = 3;
    pub const INIT: u64 = 4;
    pub const BATCH: u64 = 5;
    pub const DROPOUT: u64 = 6;
}

fn round(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes the parts into a single seed; order-sensitive.
pub(crate) fn mix64(parts: &[u64]) -> u64 {
    let mut acc: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        acc = round(acc ^ p);
    }
    acc
}

pub(crate) fn derive_rng(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(parts))
}
