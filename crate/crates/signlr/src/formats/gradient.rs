use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use signlr_core::{GradEstimate, LayerGrad, Tensor2};

use super::{read_json, write_file, write_json};
use crate::error::{CliError, Result};

/// JSON form of a gradient estimate, laid out like a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientFile {
    pub copy_count: usize,
    pub mean_loss: f64,
    pub layers: Vec<GradientLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientLayer {
    pub d_theta: Vec<Vec<f64>>,
    pub d_sigma: Vec<f64>,
}

impl GradientFile {
    pub fn from_estimate(g: &GradEstimate) -> Self {
        Self {
            copy_count: g.copy_count,
            mean_loss: g.mean_loss,
            layers: g
                .layers
                .iter()
                .map(|l| GradientLayer {
                    d_theta: (0..l.d_theta.rows()).map(|r| l.d_theta.row(r).to_vec()).collect(),
                    d_sigma: l.d_sigma.clone(),
                })
                .collect(),
        }
    }

    pub fn to_estimate(&self) -> Result<GradEstimate> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let rows: Vec<&[f64]> = l.d_theta.iter().map(Vec::as_slice).collect();
            let d_theta = Tensor2::from_rows(&rows).map_err(|e| CliError::Config(e.to_string()))?;
            layers.push(LayerGrad { d_theta, d_sigma: l.d_sigma.clone() });
        }
        Ok(GradEstimate { layers, copy_count: self.copy_count, mean_loss: self.mean_loss })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Flat vector as consecutive little-endian f64 values.
pub fn encode_le(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_le(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(CliError::Config(format!("binary length {} is not a multiple of 8", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

/// Writes the estimate flattened in ω order (all θ blocks, then all σ).
pub fn save_binary(g: &GradEstimate, path: &Path) -> Result<()> {
    write_file(path, &encode_le(&g.flatten()))
}

pub fn load_binary(path: &Path) -> Result<Vec<f64>> {
    decode_le(&fs::read(path).map_err(CliError::io(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use signlr_core::{Activation, NetworkSpec};

    fn sample() -> (NetworkSpec, GradEstimate) {
        let net = NetworkSpec::init(&[2, 3, 2], &[Activation::Relu, Activation::Identity], 0.1, 0.1, 4).unwrap();
        let flat: Vec<f64> = (0..net.param_count()).map(|i| i as f64 * 0.25 - 3.0).collect();
        let g = GradEstimate::unflatten(&net, &flat).unwrap();
        (net, g)
    }

    #[test]
    fn json_round_trip() {
        let (_, g) = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.json");
        GradientFile::from_estimate(&g).save(&p).unwrap();
        assert_eq!(GradientFile::load(&p).unwrap().to_estimate().unwrap(), g);
    }

    #[test]
    fn binary_is_omega_order() {
        let (net, g) = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        save_binary(&g, &p).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len() as usize, 8 * net.param_count());
        let flat = load_binary(&p).unwrap();
        assert_eq!(flat, g.flatten());
        assert_eq!(flat[0], -3.0);
        assert_eq!(GradEstimate::unflatten(&net, &flat).unwrap(), g);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        assert!(decode_le(&[0u8; 12]).is_err());
    }
}
