//! Seeded fixtures shared by the benchmarks.

use framepack_core::LatentVideo;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_video(t: usize, h: usize, w: usize, c: usize, seed: u64) -> LatentVideo {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..t * h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect();
    LatentVideo::new(t, h, w, c, data).expect("nonzero dims")
}

/// Global time index of every history frame for a history of `t` frames.
pub fn past_times(t: usize) -> Vec<f64> {
    (0..t).map(|i| i as f64).collect()
}
