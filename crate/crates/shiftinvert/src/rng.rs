//! Seeded random streams.
//!
//! Every random choice in the crate flows through [`SeededRng`]. Child
//! streams are forked from a parent by drawing a fresh seed, so a run is
//! reproducible from its root seed and configuration alone.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child stream.
pub fn fork(rng: &mut SeededRng) -> SeededRng {
    ChaCha8Rng::seed_from_u64(rng.next_u64())
}

/// Seed for trial `index` of a run rooted at `root`.
pub fn trial_seed(root: u64, index: u64) -> u64 {
    root.wrapping_add(index)
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}
