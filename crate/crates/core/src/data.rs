//! In-process synthetic datasets.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss::one_hot;
use crate::rng::RngStream;

/// Key-space domain for dataset generation draws.
const DATA_DOMAIN: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub x: Vec<f64>,
    /// One-hot label for classification; empty for target-free objectives.
    pub target: Vec<f64>,
}

impl Sample {
    pub fn new(x: Vec<f64>, target: Vec<f64>) -> Self {
        Self { x, target }
    }

    /// Index of the hot entry, if any.
    pub fn class(&self) -> Option<usize> {
        self.target.iter().position(|&v| v == 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Deterministic shuffle, then the first `round(fraction * len)` samples
    /// become the first part.
    pub fn split(&self, fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let order = permutation(self.len(), &RngStream::new(seed).batch(DATA_DOMAIN).sample(1));
        let cut = libm::round(fraction.clamp(0.0, 1.0) * self.len() as f64) as usize;
        let pick = |idx: &[usize]| Dataset::new(idx.iter().map(|&i| self.samples[i].clone()).collect());
        (pick(&order[..cut]), pick(&order[cut..]))
    }
}

/// Fisher–Yates permutation of `0..n` driven by `stream`.
pub fn permutation(n: usize, stream: &RngStream) -> Vec<usize> {
    let mut next = stream.uniform_u64();
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (next() % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Isotropic Gaussian blobs. Class centres sit on a circle (first two
/// dimensions) of radius `separation`; every point gets `spread` standard
/// deviation noise in every dimension. Points are assigned to classes round
/// robin.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlobsSpec {
    pub classes: usize,
    pub points: usize,
    pub dims: usize,
    pub separation: f64,
    pub spread: f64,
}

impl Default for BlobsSpec {
    fn default() -> Self {
        Self { classes: 3, points: 300, dims: 2, separation: 3.0, spread: 1.0 }
    }
}

pub fn blobs(spec: &BlobsSpec, seed: u64) -> Result<Dataset> {
    if spec.classes < 2 || spec.dims < 1 || spec.points == 0 {
        return Err(Error::InvalidArgument("blobs need >= 2 classes, >= 1 dim and >= 1 point".into()));
    }
    let stream = RngStream::new(seed).batch(DATA_DOMAIN);
    let samples = (0..spec.points)
        .map(|n| {
            let class = n % spec.classes;
            let angle = 2.0 * core::f64::consts::PI * class as f64 / spec.classes as f64;
            let noise = stream.sample(n as u64).gaussian_vec(spec.dims);
            let x = noise
                .iter()
                .enumerate()
                .map(|(d, e)| {
                    let centre = match d {
                        0 => spec.separation * libm::cos(angle),
                        1 => spec.separation * libm::sin(angle),
                        _ => 0.0,
                    };
                    centre + spec.spread * e
                })
                .collect();
            Sample::new(x, one_hot(class, spec.classes))
        })
        .collect();
    Ok(Dataset::new(samples))
}

/// Two interleaved half circles with Gaussian jitter of `noise`.
pub fn two_moons(points: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if points == 0 {
        return Err(Error::InvalidArgument("two_moons needs at least one point".into()));
    }
    let stream = RngStream::new(seed).batch(DATA_DOMAIN).layer(2);
    let samples = (0..points)
        .map(|n| {
            let class = n % 2;
            let draws = stream.sample(n as u64).gaussian_vec(3);
            // position along the arc from the first draw mapped through tanh
            let t = core::f64::consts::PI * 0.5 * (1.0 + libm::tanh(draws[0]));
            let (x, y) = if class == 0 {
                (libm::cos(t), libm::sin(t))
            } else {
                (1.0 - libm::cos(t), 0.5 - libm::sin(t))
            };
            Sample::new(alloc::vec![x + noise * draws[1], y + noise * draws[2]], one_hot(class, 2))
        })
        .collect();
    Ok(Dataset::new(samples))
}
