use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::NetworkSpec;
use crate::tensor::{norm, Tensor2};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerGrad {
    pub d_theta: Tensor2,
    pub d_sigma: Vec<f64>,
}

/// Per-layer θ and σ directions. Flattened in omega order: every θ block
/// first, then every σ vector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradEstimate {
    pub layers: Vec<LayerGrad>,
    /// Number of (sample, copy) evaluations averaged into this estimate.
    pub copy_count: usize,
    /// Mean loss over the same evaluations.
    pub mean_loss: f64,
}

impl GradEstimate {
    pub fn zeros_like(net: &NetworkSpec) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| LayerGrad {
                d_theta: Tensor2::zeros(l.theta.rows(), l.theta.cols()),
                d_sigma: vec![0.0; l.sigma.len()],
            })
            .collect();
        Self { layers, copy_count: 1, mean_loss: 0.0 }
    }

    pub fn theta_len(&self) -> usize {
        self.layers.iter().map(|l| l.d_theta.len()).sum()
    }

    pub fn len(&self) -> usize {
        self.theta_len() + self.layers.iter().map(|l| l.d_sigma.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.theta_flat();
        for l in &self.layers {
            out.extend_from_slice(&l.d_sigma);
        }
        out
    }

    /// θ coordinates only, in omega order.
    pub fn theta_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.theta_len());
        for l in &self.layers {
            out.extend_from_slice(l.d_theta.as_slice());
        }
        out
    }

    /// Inverse of [`GradEstimate::flatten`] using the layer shapes of `self`.
    pub fn unflatten_like(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.len() {
            return Err(Error::Shape { expected: self.len(), got: flat.len() });
        }
        let mut out = self.clone();
        let mut at = 0;
        for l in &mut out.layers {
            let n = l.d_theta.len();
            l.d_theta.as_mut_slice().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        for l in &mut out.layers {
            let n = l.d_sigma.len();
            l.d_sigma.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(out)
    }

    pub fn unflatten(net: &NetworkSpec, flat: &[f64]) -> Result<Self> {
        Self::zeros_like(net).unflatten_like(flat)
    }

    pub fn matches_network(&self, net: &NetworkSpec) -> bool {
        self.layers.len() == net.depth()
            && self.layers.iter().zip(net.layers()).all(|(g, l)| {
                g.d_theta.shape() == l.theta.shape() && g.d_sigma.len() == l.sigma.len()
            })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for l in &mut out.layers {
            l.d_theta.as_mut_slice().iter_mut().for_each(|v| *v = f(*v));
            l.d_sigma.iter_mut().for_each(|v| *v = f(*v));
        }
        out
    }

    pub fn zero_sigma(&mut self) {
        for l in &mut self.layers {
            l.d_sigma.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.d_theta.is_finite() && l.d_sigma.iter().all(|v| v.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        norm(&self.flatten())
    }
}
