//! Seed derivation.
//!
//! All randomness flows from [`ChaCha8Rng`], whose output stream is fixed
//! across platforms. Child seeds are derived with the SplitMix64 finalizer so
//! that a run's seed depends only on its coordinates, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a sequence of words.
pub fn derive_seed(words: &[u64]) -> u64 {
    words.iter().fold(0x5EED_5EED_5EED_5EED, |acc, &w| mix(acc ^ mix(w)))
}

/// Seed of one simulation run.
pub fn run_seed(design_index: usize, repetition: usize, global_seed: u64) -> u64 {
    derive_seed(&[design_index as u64, repetition as u64, global_seed])
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
