//! Sign encoding of θ directions with 8-bit storage.

use alloc::vec::Vec;

use super::grad::GradEstimate;
use crate::error::{Error, Result};
use crate::numerics::sign;
use crate::tensor::Tensor2;

#[inline]
fn sign_i8(x: f64) -> i8 {
    sign(x) as i8
}

/// Matrix of `{-1, 0, +1}` stored one byte per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
}

impl SignMatrix {
    pub fn encode(z: &Tensor2) -> Self {
        Self { rows: z.rows(), cols: z.cols(), data: z.as_slice().iter().map(|&v| sign_i8(v)).collect() }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<i8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape { expected: rows * cols, got: data.len() });
        }
        if data.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(Error::InvalidArgument("sign entries must be -1, 0 or 1".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn decode(&self) -> Tensor2 {
        Tensor2::from_vec(self.rows, self.cols, self.data.iter().map(|&s| f64::from(s)).collect())
            .expect("shape preserved")
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.data
    }

    pub fn storage_bytes(&self) -> usize {
        self.data.len() * core::mem::size_of::<i8>()
    }
}

/// Elementwise sign of one copy's `Z^θ`, taken before loss weighting.
pub fn sign_encode_per_sample(z_theta: &Tensor2) -> SignMatrix {
    SignMatrix::encode(z_theta)
}

/// Elementwise sign of a finished estimate, θ and σ parts alike.
pub fn sign_of_update(g: &GradEstimate) -> GradEstimate {
    g.map(sign)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignLayer {
    pub s_theta: SignMatrix,
    pub d_sigma: Vec<f64>,
}

/// Sign-encoded θ with σ kept in floating point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignGrad {
    pub layers: Vec<SignLayer>,
}

impl SignGrad {
    pub fn encode(g: &GradEstimate) -> Self {
        Self {
            layers: g
                .layers
                .iter()
                .map(|l| SignLayer { s_theta: SignMatrix::encode(&l.d_theta), d_sigma: l.d_sigma.clone() })
                .collect(),
        }
    }

    /// Back to floats; θ entries become `-1.0`, `0.0` or `1.0`.
    pub fn decode(&self) -> GradEstimate {
        GradEstimate {
            layers: self
                .layers
                .iter()
                .map(|l| super::LayerGrad { d_theta: l.s_theta.decode(), d_sigma: l.d_sigma.clone() })
                .collect(),
            copy_count: 1,
            mean_loss: 0.0,
        }
    }

    pub fn storage(&self) -> StorageReport {
        let theta: usize = self.layers.iter().map(|l| l.s_theta.data.len()).sum();
        let sigma: usize = self.layers.iter().map(|l| l.d_sigma.len()).sum();
        StorageReport::for_counts(theta, sigma)
    }
}

/// Bytes needed for one copy's direction under different encodings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StorageReport {
    pub theta_entries: usize,
    pub sigma_entries: usize,
    /// θ as i8, σ as f64.
    pub sign_bytes: usize,
    /// Everything as f64.
    pub f64_bytes: usize,
    /// Everything as f32.
    pub f32_bytes: usize,
}

impl StorageReport {
    pub fn for_counts(theta_entries: usize, sigma_entries: usize) -> Self {
        Self {
            theta_entries,
            sigma_entries,
            sign_bytes: theta_entries + 8 * sigma_entries,
            f64_bytes: 8 * (theta_entries + sigma_entries),
            f32_bytes: 4 * (theta_entries + sigma_entries),
        }
    }

    pub fn ratio_vs_f64(&self) -> f64 {
        self.f64_bytes as f64 / self.sign_bytes as f64
    }

    pub fn ratio_vs_f32(&self) -> f64 {
        self.f32_bytes as f64 / self.sign_bytes as f64
    }

    pub fn bytes_saved_vs_f64(&self) -> usize {
        self.f64_bytes - self.sign_bytes
    }
}
