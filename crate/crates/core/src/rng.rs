//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream selected by a
//! `(seed, key)` pair, so results never depend on the order in which
//! independent tasks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream `key` of the generator seeded with `seed`.
pub fn keyed_rng(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Derives a child seed from `(seed, key)` with the SplitMix64 finaliser.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    let mut z = seed ^ key.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
