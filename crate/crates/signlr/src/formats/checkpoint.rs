use std::path::Path;

use serde::{Deserialize, Serialize};
use signlr_core::{Activation, LayerParams, NetworkSpec, Tensor2};

use super::{read_json, write_json};
use crate::error::{CliError, Result};

/// Network parameters as stored on disk. Each `theta` is a list of rows;
/// row `i` holds the bias followed by the incoming weights of neuron `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub sigma_w: f64,
    pub layers: Vec<CheckpointLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointLayer {
    pub theta: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
}

impl Checkpoint {
    pub fn from_network(net: &NetworkSpec) -> Self {
        Self {
            sizes: net.sizes().to_vec(),
            activations: net.layers().iter().map(|l| l.activation).collect(),
            sigma_w: net.sigma_w(),
            layers: net
                .layers()
                .iter()
                .map(|l| CheckpointLayer {
                    theta: (0..l.theta.rows()).map(|r| l.theta.row(r).to_vec()).collect(),
                    sigma: l.sigma.clone(),
                })
                .collect(),
        }
    }

    pub fn to_network(&self) -> Result<NetworkSpec> {
        if self.activations.len() != self.layers.len() || self.sizes.len() != self.layers.len() + 1 {
            return Err(CliError::Config("checkpoint layer counts disagree".into()));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (l, (layer, act)) in self.layers.iter().zip(&self.activations).enumerate() {
            let cols = self.sizes[l] + 1;
            if layer.theta.len() != self.sizes[l + 1] || layer.theta.iter().any(|r| r.len() != cols) {
                return Err(CliError::Config(format!("checkpoint layer {} has the wrong shape", l + 1)));
            }
            let rows: Vec<&[f64]> = layer.theta.iter().map(Vec::as_slice).collect();
            let theta = Tensor2::from_rows(&rows).map_err(|e| CliError::Config(e.to_string()))?;
            layers.push(LayerParams { theta, sigma: layer.sigma.clone(), activation: *act });
        }
        NetworkSpec::new(layers, self.sigma_w).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        for seed in 0..50 {
            let net = NetworkSpec::init(&[3, 9, 2], &[Activation::Tanh, Activation::Identity], 0.2, 0.05, seed).unwrap();
            Checkpoint::from_network(&net).save(&path).unwrap();
            assert_eq!(Checkpoint::load(&path).unwrap().to_network().unwrap(), net);
        }
    }

    #[test]
    fn rejects_ragged_theta() {
        let net = NetworkSpec::init(&[2, 2], &[Activation::Identity], 0.1, 0.1, 0).unwrap();
        let mut ck = Checkpoint::from_network(&net);
        ck.layers[0].theta[1].pop();
        assert!(matches!(ck.to_network(), Err(CliError::Config(_))));
    }
}
