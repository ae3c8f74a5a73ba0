//! Labelled deterministic random streams.
//!
//! Every component draws from its own stream keyed by `(master seed, label)`,
//! so adding draws in one component never perturbs another. The key is the
//! SHA-256 digest of the seed and label, used as a ChaCha8 seed; both are
//! fully specified algorithms, which makes streams identical across platforms.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// A deterministic random stream derived from a master seed and a label.
#[derive(Debug, Clone)]
pub struct RngStream {
    label: String,
    rng: ChaCha8Rng,
}

/// Creates the stream for `(master_seed, label)`.
pub fn rng_stream(master_seed: u64, label: &str) -> RngStream {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    RngStream {
        label: label.to_owned(),
        rng: ChaCha8Rng::from_seed(key),
    }
}

impl RngStream {
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Derives a child stream; equivalent to `rng_stream` on a derived seed, so
    /// children of distinct parents never share state.
    pub fn fork(&mut self, label: &str) -> RngStream {
        let seed = self.rng.next_u64();
        let mut child = rng_stream(seed, label);
        child.label = format!("{}/{}", self.label, label);
        child
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw in `(0, 1]`, safe to take the logarithm of.
    pub fn unit_open0(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    /// Exponential variate with the given mean.
    pub fn exponential(&mut self, mean: f64) -> f64 {
        -mean * self.unit_open0().ln()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Access to the underlying generator for `rand` helpers.
    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
