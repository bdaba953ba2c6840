//! Input generators shared by the benchmarks.

use motifscope::Series;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random walk of length `n`.
pub fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            x += rng.random_range(-1.0..1.0);
            x
        })
        .collect()
}

/// Random walk with `count` evenly spaced copies of a sine burst of length
/// `l` added to it.
pub fn planted_walk(n: usize, l: usize, count: usize, seed: u64) -> Series {
    let mut t = random_walk(n, seed);
    let step = n / count;
    for c in 0..count {
        let at = c * step + step / 4;
        for i in 0..l.min(n - at) {
            t[at + i] += 8.0 * (i as f64 * 0.6).sin();
        }
    }
    Series::new(t)
}
