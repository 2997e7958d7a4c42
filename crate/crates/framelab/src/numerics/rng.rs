//! Deterministic, splittable random streams.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// A ChaCha stream addressed by `(master_seed, stream)`.
///
/// Monte Carlo sites derive one stream per trial, so any trial is
/// reproducible in isolation and results do not depend on execution order.
#[derive(Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(stream);
        RngStream { rng }
    }

    /// Stream for trial `trial` of a flat experiment.
    pub fn for_trial(master_seed: u64, trial: u64) -> Self {
        Self::new(master_seed, trial)
    }

    /// Stream for a (ladder size, trial) pair. The size index occupies the
    /// high half so trial indices never collide across sizes.
    pub fn for_size_trial(master_seed: u64, size_index: u32, trial: u32) -> Self {
        Self::new(master_seed, (u64::from(size_index) << 32) | u64::from(trial))
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Standard complex normal, `E|z|² = 1`.
    pub fn complex_normal(&mut self) -> Complex64 {
        Complex64::new(self.normal(), self.normal()) * FRAC_1_SQRT_2
    }

    pub fn below(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Sorted k-subset of `{0, .., n-1}` by partial Fisher-Yates.
    pub fn sorted_subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} of {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }
}
