//! Deterministic stream derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a master
//! seed and a path of indices (grid point, replicate, permutation, ...). The
//! derivation depends only on the integers involved, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds an index path into a master seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(master.wrapping_add(GOLDEN)), |acc, &i| {
        mix64(acc ^ mix64(i.wrapping_add(GOLDEN)).rotate_left(17))
    })
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}
