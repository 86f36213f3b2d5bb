use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{param, Result};

/// Seeded, counter-based random source owned by a single run.
///
/// Backed by ChaCha8, whose output depends only on `(seed, stream, counter)`,
/// so draw sequences are identical across runs and platforms.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// An independent stream for the same seed. Distinct `stream` ids never overlap.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Splits off a child generator seeded from this one's next draw.
    pub fn fork(&mut self) -> SeededRng {
        SeededRng::new(self.inner.next_u64())
    }

    pub fn gaussian_sample(&mut self, n: usize, mean: f64, std: f64) -> Result<Vec<f64>> {
        if !(std >= 0.0) || !std.is_finite() {
            return Err(param(format!("standard deviation must be finite and >= 0, got {std}")));
        }
        if !mean.is_finite() {
            return Err(param(format!("mean must be finite, got {mean}")));
        }
        if std == 0.0 {
            return Ok(vec![mean; n]);
        }
        Ok((0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut self.inner);
                mean + std * z
            })
            .collect())
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform draw in `[low, high)`.
    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        if low == high {
            return low;
        }
        self.inner.random_range(low..high)
    }

    /// Bernoulli draw with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.inner.random::<f64>() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}
