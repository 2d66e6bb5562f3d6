//! Shared inputs for the benchmarks.

use xi_boost::rng::seeded;
use xi_boost::{sample_rotation, Sample};

/// Independent standard Gaussian pairs, fixed by `seed`.
pub fn gaussian_sample(n: usize, seed: u64) -> Sample {
    sample_rotation(&mut seeded(seed), n, 0.0).expect("n >= 2")
}

/// The `(n, M)` grid of the timing study.
pub const TIMING_GRID: [(usize, usize); 8] = [
    (1000, 1),
    (1000, 20),
    (1000, 100),
    (1000, 200),
    (5000, 1),
    (5000, 20),
    (5000, 100),
    (5000, 200),
];
