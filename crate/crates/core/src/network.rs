//! Multilayer perceptron with noise injection.
//!
//! Layer `l` maps `x̃ = [1, x^(l-1)]` to `v^(l) = θ^(l) x̃ + noise` and
//! `x^(l) = φ(v^(l))`. Column 0 of `θ` is the bias. Three noise schemes are
//! supported:
//!
//! - LR: `v = θ x̃ + σ ⊙ ε` with one standard normal `ε_i` per neuron.
//! - ES: `v = (θ + σ_w E) x̃` with one standard normal `E_ij` per weight.
//! - Hybrid: ES on layers `1..=split`, LR on the rest.
//!
//! The softmax of the classification loss is not part of the network and is
//! never perturbed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::{dot, Tensor2};

pub use crate::numerics::Activation;

pub const SIGMA_MIN: f64 = 1e-3;
pub const DEFAULT_SIGMA: f64 = 0.1;
pub const DEFAULT_SIGMA_W: f64 = 0.1;

/// Key-space domain reserved for weight initialisation draws.
const INIT_DOMAIN: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerParams {
    /// Shape `(m_l, m_{l-1} + 1)`; column 0 is the bias.
    pub theta: Tensor2,
    /// Per-neuron noise scale for pre-activation noise.
    pub sigma: Vec<f64>,
    pub activation: Activation,
}

impl LayerParams {
    pub fn outputs(&self) -> usize {
        self.theta.rows()
    }

    pub fn inputs(&self) -> usize {
        self.theta.cols() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkSpec {
    sizes: Vec<usize>,
    layers: Vec<LayerParams>,
    sigma_w: f64,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerParams>, sigma_w: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("at least one layer is required".into()));
        }
        let mut sizes = Vec::with_capacity(layers.len() + 1);
        sizes.push(layers[0].theta.cols().saturating_sub(1));
        for (l, layer) in layers.iter().enumerate() {
            if layer.theta.cols() == 0 {
                return Err(Error::InvalidNetwork(format!("layer {} has no bias column", l + 1)));
            }
            if layer.inputs() != sizes[l] {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} expects {} inputs but previous layer has {}",
                    l + 1,
                    layer.inputs(),
                    sizes[l]
                )));
            }
            if layer.sigma.len() != layer.outputs() {
                return Err(Error::Shape { expected: layer.outputs(), got: layer.sigma.len() });
            }
            if !layer.theta.is_finite() {
                return Err(Error::NonFinite("theta"));
            }
            for &s in &layer.sigma {
                if !(s >= SIGMA_MIN) {
                    return Err(Error::SigmaTooSmall { value: s, min: SIGMA_MIN });
                }
            }
            sizes.push(layer.outputs());
        }
        if !(sigma_w >= SIGMA_MIN) {
            return Err(Error::SigmaTooSmall { value: sigma_w, min: SIGMA_MIN });
        }
        Ok(Self { sizes, layers, sigma_w })
    }

    /// Gaussian weights scaled by `1/sqrt(fan_in + 1)`, zero bias, constant
    /// `sigma_init` for every neuron.
    pub fn init(
        sizes: &[usize],
        activations: &[Activation],
        sigma_init: f64,
        sigma_w: f64,
        seed: u64,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidNetwork("need at least input and output sizes".into()));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::Shape { expected: sizes.len() - 1, got: activations.len() });
        }
        let stream = RngStream::new(seed).batch(INIT_DOMAIN);
        let layers = sizes
            .windows(2)
            .zip(activations)
            .enumerate()
            .map(|(l, (w, &activation))| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = 1.0 / libm::sqrt((fan_in + 1) as f64);
                let mut theta = stream.layer(l as u64 + 1).gaussian2(fan_out, fan_in + 1);
                for r in 0..fan_out {
                    let row = theta.row_mut(r);
                    row[0] = 0.0;
                    for v in &mut row[1..] {
                        *v *= scale;
                    }
                }
                LayerParams { theta, sigma: vec![sigma_init; fan_out], activation }
            })
            .collect();
        Self::new(layers, sigma_w)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &LayerParams {
        &self.layers[l]
    }

    pub fn sigma_w(&self) -> f64 {
        self.sigma_w
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    /// Number of θ coordinates (the boundary between θ and σ in omega order).
    pub fn theta_count(&self) -> usize {
        self.layers.iter().map(|l| l.theta.len()).sum()
    }

    pub fn sigma_count(&self) -> usize {
        self.layers.iter().map(|l| l.sigma.len()).sum()
    }

    pub fn param_count(&self) -> usize {
        self.theta_count() + self.sigma_count()
    }

    /// Parameters in omega order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.theta.as_slice());
        }
        for l in &self.layers {
            out.extend_from_slice(&l.sigma);
        }
        out
    }

    /// Overwrites all parameters from omega order. σ entries must stay at or
    /// above [`SIGMA_MIN`].
    pub fn set_flat_params(&mut self, omega: &[f64]) -> Result<()> {
        if omega.len() != self.param_count() {
            return Err(Error::Shape { expected: self.param_count(), got: omega.len() });
        }
        if let Some(&bad) = omega[self.theta_count()..].iter().find(|&&s| !(s >= SIGMA_MIN)) {
            return Err(Error::SigmaTooSmall { value: bad, min: SIGMA_MIN });
        }
        if omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.theta.len();
            l.theta.as_mut_slice().copy_from_slice(&omega[at..at + n]);
            at += n;
        }
        for l in &mut self.layers {
            let n = l.sigma.len();
            l.sigma.copy_from_slice(&omega[at..at + n]);
            at += n;
        }
        Ok(())
    }

    pub fn with_sigma_w(mut self, sigma_w: f64) -> Result<Self> {
        if !(sigma_w >= SIGMA_MIN) {
            return Err(Error::SigmaTooSmall { value: sigma_w, min: SIGMA_MIN });
        }
        self.sigma_w = sigma_w;
        Ok(self)
    }

    pub fn forward_clean(&self, x0: &[f64]) -> Result<ForwardTrace> {
        self.forward_with(x0, NoiseScheme::Lr, &mut ZeroNoise)
    }

    pub fn forward_lr(&self, x0: &[f64], stream: &RngStream) -> Result<ForwardTrace> {
        self.forward_with(x0, NoiseScheme::Lr, &mut stream.clone())
    }

    pub fn forward_es(&self, x0: &[f64], stream: &RngStream) -> Result<ForwardTrace> {
        self.forward_with(x0, NoiseScheme::Es, &mut stream.clone())
    }

    pub fn forward_hybrid(&self, x0: &[f64], stream: &RngStream, split: usize) -> Result<ForwardTrace> {
        self.forward_with(x0, NoiseScheme::Hybrid { split }, &mut stream.clone())
    }

    /// Clean output only, without building a trace.
    pub fn predict(&self, x0: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x0)?;
        let mut x = x0.to_vec();
        for layer in &self.layers {
            let mut xt = Vec::with_capacity(x.len() + 1);
            xt.push(1.0);
            xt.extend_from_slice(&x);
            x = (0..layer.outputs())
                .map(|i| layer.activation.apply(dot(layer.theta.row(i), &xt)))
                .collect();
        }
        Ok(x)
    }

    /// Index of the largest clean output.
    pub fn predict_class(&self, x0: &[f64]) -> Result<usize> {
        let out = self.predict(x0)?;
        Ok(argmax(&out))
    }

    fn check_input(&self, x0: &[f64]) -> Result<()> {
        if x0.len() != self.input_dim() {
            return Err(Error::Shape { expected: self.input_dim(), got: x0.len() });
        }
        Ok(())
    }

    /// Forward pass drawing noise from an arbitrary source. All public
    /// forward variants route through here, so replaying a trace's recorded
    /// noise reproduces it bit for bit.
    pub fn forward_with(
        &self,
        x0: &[f64],
        scheme: NoiseScheme,
        noise: &mut impl NoiseSource,
    ) -> Result<ForwardTrace> {
        self.check_input(x0)?;
        if let NoiseScheme::Hybrid { split } = scheme {
            if split > self.depth() {
                return Err(Error::SplitOutOfRange { split, layers: self.depth() });
            }
        }
        let mut traces = Vec::with_capacity(self.depth());
        let mut x = x0.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut input = Vec::with_capacity(x.len() + 1);
            input.push(1.0);
            input.extend_from_slice(&x);
            let rows = layer.outputs();
            let (pre_activation, layer_noise): (Vec<f64>, LayerNoise) = if scheme.weight_noise_at(l + 1) {
                let e = noise.weight(l + 1, rows, input.len());
                let v = (0..rows)
                    .map(|i| {
                        let mut acc = 0.0;
                        for (j, &xj) in input.iter().enumerate() {
                            acc += (layer.theta.get(i, j) + self.sigma_w * e.get(i, j)) * xj;
                        }
                        acc
                    })
                    .collect();
                (v, LayerNoise::Weight(e))
            } else {
                let eps = noise.pre_activation(l + 1, rows);
                let v = (0..rows)
                    .map(|i| dot(layer.theta.row(i), &input) + layer.sigma[i] * eps[i])
                    .collect();
                (v, LayerNoise::PreActivation(eps))
            };
            x = crate::numerics::activation(&pre_activation, layer.activation);
            traces.push(LayerTrace { input, pre_activation, noise: layer_noise });
        }
        Ok(ForwardTrace { layers: traces, output: x, loss: None })
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseScheme {
    Lr,
    Es,
    /// Weight noise on layers `1..=split`, pre-activation noise after.
    Hybrid { split: usize },
}

impl NoiseScheme {
    /// `layer` is 1-based.
    pub fn weight_noise_at(self, layer: usize) -> bool {
        match self {
            NoiseScheme::Lr => false,
            NoiseScheme::Es => true,
            NoiseScheme::Hybrid { split } => layer <= split,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerNoise {
    /// `ε^(l)`, one entry per neuron.
    PreActivation(Vec<f64>),
    /// `E^(l)`, same shape as `θ^(l)`.
    Weight(Tensor2),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// `[1, x^(l-1)]`.
    pub input: Vec<f64>,
    pub pre_activation: Vec<f64>,
    pub noise: LayerNoise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub layers: Vec<LayerTrace>,
    pub output: Vec<f64>,
    pub loss: Option<f64>,
}

impl ForwardTrace {
    /// Checks `x^(l) = φ(v^(l))` for every layer.
    pub fn is_consistent(&self, net: &NetworkSpec) -> bool {
        for (l, layer) in self.layers.iter().enumerate() {
            let act = net.layer(l).activation;
            let next: &[f64] = match self.layers.get(l + 1) {
                Some(t) => &t.input[1..],
                None => &self.output,
            };
            if next.len() != layer.pre_activation.len() {
                return false;
            }
            if layer.pre_activation.iter().zip(next).any(|(&v, &x)| act.apply(v) != x) {
                return false;
            }
        }
        true
    }
}

/// Supplier of standard normal noise, addressed by 1-based layer index.
pub trait NoiseSource {
    fn pre_activation(&mut self, layer: usize, len: usize) -> Vec<f64>;
    fn weight(&mut self, layer: usize, rows: usize, cols: usize) -> Tensor2;
}

impl NoiseSource for RngStream {
    fn pre_activation(&mut self, layer: usize, len: usize) -> Vec<f64> {
        self.layer(layer as u64).gaussian_vec(len)
    }

    fn weight(&mut self, layer: usize, rows: usize, cols: usize) -> Tensor2 {
        self.layer(layer as u64).gaussian2(rows, cols)
    }
}

/// All-zero noise: the deterministic inference path.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn pre_activation(&mut self, _layer: usize, len: usize) -> Vec<f64> {
        vec![0.0; len]
    }

    fn weight(&mut self, _layer: usize, rows: usize, cols: usize) -> Tensor2 {
        Tensor2::zeros(rows, cols)
    }
}

/// Sign-flipped draws of an inner source, for antithetic pairs.
#[derive(Debug, Clone)]
pub struct Negated<S>(pub S);

impl<S: NoiseSource> NoiseSource for Negated<S> {
    fn pre_activation(&mut self, layer: usize, len: usize) -> Vec<f64> {
        let mut v = self.0.pre_activation(layer, len);
        v.iter_mut().for_each(|x| *x = -*x);
        v
    }

    fn weight(&mut self, layer: usize, rows: usize, cols: usize) -> Tensor2 {
        let mut e = self.0.weight(layer, rows, cols);
        e.as_mut_slice().iter_mut().for_each(|x| *x = -*x);
        e
    }
}

/// Replays the noise recorded in a trace.
#[derive(Debug, Clone, Copy)]
pub struct Replay<'a>(pub &'a ForwardTrace);

impl NoiseSource for Replay<'_> {
    fn pre_activation(&mut self, layer: usize, len: usize) -> Vec<f64> {
        match &self.0.layers[layer - 1].noise {
            LayerNoise::PreActivation(eps) => eps.clone(),
            LayerNoise::Weight(_) => vec![0.0; len],
        }
    }

    fn weight(&mut self, layer: usize, rows: usize, cols: usize) -> Tensor2 {
        match &self.0.layers[layer - 1].noise {
            LayerNoise::Weight(e) => e.clone(),
            LayerNoise::PreActivation(_) => Tensor2::zeros(rows, cols),
        }
    }
}
