//! Counter-keyed Gaussian noise streams.
//!
//! Every draw is addressed by `(base_seed, batch, sample, copy, layer)`. The
//! key is hashed into a fresh ChaCha8 seed, so the samples for one key never
//! depend on how many other keys were evaluated before it or on which thread.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::{Tensor1, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct NoiseKey {
    pub batch: u64,
    pub sample: u64,
    pub copy: u64,
    pub layer: u64,
}

impl NoiseKey {
    pub const fn new(batch: u64, sample: u64, copy: u64, layer: u64) -> Self {
        Self { batch, sample, copy, layer }
    }
}

/// A base seed plus substream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngStream {
    pub base_seed: u64,
    pub key: NoiseKey,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub const fn new(base_seed: u64) -> Self {
        Self { base_seed, key: NoiseKey::new(0, 0, 0, 0) }
    }

    pub const fn with_key(self, key: NoiseKey) -> Self {
        Self { base_seed: self.base_seed, key }
    }

    pub const fn batch(mut self, batch: u64) -> Self {
        self.key.batch = batch;
        self
    }

    pub const fn sample(mut self, sample: u64) -> Self {
        self.key.sample = sample;
        self
    }

    pub const fn copy(mut self, copy: u64) -> Self {
        self.key.copy = copy;
        self
    }

    pub const fn layer(mut self, layer: u64) -> Self {
        self.key.layer = layer;
        self
    }

    /// Generator positioned at the start of this key's substream.
    pub fn generator(&self) -> ChaCha8Rng {
        let words = [self.key.batch, self.key.sample, self.key.copy, self.key.layer];
        let mut h = splitmix(self.base_seed);
        let mut seed = [0u8; 32];
        for (i, w) in words.iter().enumerate() {
            h = splitmix(h ^ splitmix(*w ^ ((i as u64 + 1) << 56)));
            seed[i * 8..(i + 1) * 8].copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }

    /// `len` i.i.d. standard normal draws.
    pub fn gaussian_vec(&self, len: usize) -> Vec<f64> {
        let mut rng = self.generator();
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    pub fn gaussian(&self, len: usize) -> Tensor1 {
        Tensor1::from_vec(self.gaussian_vec(len))
    }

    pub fn gaussian2(&self, rows: usize, cols: usize) -> Tensor2 {
        Tensor2::from_vec(rows, cols, self.gaussian_vec(rows * cols)).expect("length matches shape")
    }

    /// Uniform `u64` source for shuffling; derived from the same key space.
    pub fn uniform_u64(&self) -> impl FnMut() -> u64 {
        let mut rng = self.generator();
        move || rand_core::RngCore::next_u64(&mut rng)
    }
}
