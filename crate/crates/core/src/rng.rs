//! Reproducible random streams.
//!
//! Each trajectory draws from its own ChaCha8 stream selected by
//! `(master seed, trajectory index)`, so an ensemble gives the same records
//! regardless of the order or thread in which its members run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type TrajectoryRng = ChaCha8Rng;

pub fn trajectory_rng(seed: u64, stream: u64) -> TrajectoryRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform on `[0, 1)`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
