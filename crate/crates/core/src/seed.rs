//! Seed derivation for reproducible sub-streams.
//!
//! Child seeds are `splitmix64(master + (stream + 1) * 0x9E3779B97F4A7C15)`,
//! i.e. the `stream + 1`-th output of a SplitMix64 generator started at
//! `master`. Sub-streams are then fed to ChaCha8.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
