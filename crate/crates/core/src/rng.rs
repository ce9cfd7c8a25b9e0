//! Seeding for reproducible experiments.
//!
//! Every episode owns a ChaCha8 stream (a counter-based generator) whose key
//! is derived from `(experiment, T, trial)` by a SplitMix64 combiner, so the
//! realization seen by a trial never depends on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RngState = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of an experiment label.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Seed of one trial: `hash(experiment, T, trial)`.
pub fn episode_seed(experiment: u64, horizon: usize, trial: usize) -> u64 {
    let h = splitmix64(experiment);
    let h = splitmix64(h ^ horizon as u64);
    splitmix64(h ^ (trial as u64).wrapping_mul(GOLDEN))
}

pub fn rng_from_seed(seed: u64) -> RngState {
    ChaCha8Rng::seed_from_u64(seed)
}
