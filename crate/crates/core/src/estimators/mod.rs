//! Gradient estimators and oracles.
//!
//! The Monte-Carlo estimators average `L · Z` over `b` samples times `C`
//! copies, where each copy is an independent noise redraw of the same input.
//! For pre-activation noise (LR)
//!
//! ```text
//! Z^θ_ij = x̃_j ε_i / σ_i        Z^σ_i = (ε_i² - 1) / σ_i
//! ```
//!
//! and for weight noise (ES) `Z^θ_ij = E_ij / σ_w` with no σ direction.
//! Hybrid reads whichever noise each layer recorded.
//!
//! Copy evaluations are independent and can be fanned out through a
//! [`CopyExecutor`]. The reduction is a left fold in (sample, copy) order no
//! matter how the copies were computed, so results are bit-identical across
//! executors and thread counts.

mod bp;
mod fd;
mod grad;
pub mod quadrature;
mod sign;

use alloc::vec::Vec;

pub use bp::{bp_gradient, mean_clean_loss};
pub use fd::{finite_difference_gradient, max_relative_error};
pub use grad::{GradEstimate, LayerGrad};
pub use sign::{sign_encode_per_sample, sign_of_update, SignGrad, SignLayer, SignMatrix, StorageReport};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::loss::Objective;
use crate::network::{LayerNoise, Negated, NetworkSpec, NoiseScheme};
use crate::rng::RngStream;
use crate::tensor::Tensor2;

/// Copies evaluated per executor call before folding.
const CHUNK: usize = 2048;

pub const DEFAULT_HYBRID_SPLIT: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EstimatorKind {
    Lr,
    Es,
    Hybrid,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Lr => "lr",
            EstimatorKind::Es => "es",
            EstimatorKind::Hybrid => "hybrid",
        }
    }
}

impl core::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(Self::Lr),
            "es" => Ok(Self::Es),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(Error::InvalidArgument(alloc::format!("unknown estimator `{other}`"))),
        }
    }
}

/// Where the sign is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SignMode {
    /// Plain estimator.
    #[default]
    Off,
    /// `sign(Z^θ)` per copy, before loss weighting and averaging.
    PerSample,
    /// Sign of the averaged estimate, θ and σ alike.
    OfUpdate,
}

impl core::str::FromStr for SignMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" | "none" => Ok(Self::Off),
            "per_sample" | "per-sample" => Ok(Self::PerSample),
            "of_update" | "of-update" => Ok(Self::OfUpdate),
            other => Err(Error::InvalidArgument(alloc::format!("unknown sign mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub sign: SignMode,
    /// Noise redraws per sample.
    pub copies: usize,
    /// Last layer (1-based) that uses weight noise when `kind` is hybrid.
    pub split: usize,
    /// Pair copy `2k + 1` with the negated noise of copy `2k`.
    pub antithetic: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { kind: EstimatorKind::Lr, sign: SignMode::Off, copies: 1, split: DEFAULT_HYBRID_SPLIT, antithetic: false }
    }
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind, copies: usize) -> Self {
        Self { kind, copies, ..Self::default() }
    }

    pub fn with_sign(mut self, sign: SignMode) -> Self {
        self.sign = sign;
        self
    }

    pub fn with_split(mut self, split: usize) -> Self {
        self.split = split;
        self
    }

    pub fn with_antithetic(mut self, antithetic: bool) -> Self {
        self.antithetic = antithetic;
        self
    }

    pub fn scheme(&self) -> NoiseScheme {
        match self.kind {
            EstimatorKind::Lr => NoiseScheme::Lr,
            EstimatorKind::Es => NoiseScheme::Es,
            EstimatorKind::Hybrid => NoiseScheme::Hybrid { split: self.split },
        }
    }

    pub fn validate(&self, net: &NetworkSpec) -> Result<()> {
        if self.copies == 0 {
            return Err(Error::InvalidArgument("copies must be at least 1".into()));
        }
        if self.kind == EstimatorKind::Hybrid && self.split > net.depth() {
            return Err(Error::SplitOutOfRange { split: self.split, layers: net.depth() });
        }
        Ok(())
    }
}

/// Runs independent jobs, returning results in job order.
pub trait CopyExecutor {
    fn run<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Evaluates jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl CopyExecutor for Serial {
    fn run<T, F>(&self, jobs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..jobs).map(f).collect()
    }
}

enum ThetaDir {
    Dense(Tensor2),
    Sign(SignMatrix),
}

struct LayerTerm {
    theta: ThetaDir,
    z_sigma: Option<Vec<f64>>,
}

/// One copy's loss and score directions, before loss weighting.
struct CopyTerm {
    loss: f64,
    layers: Vec<LayerTerm>,
}

fn copy_term(
    net: &NetworkSpec,
    sample: &Sample,
    objective: &Objective,
    config: &EstimatorConfig,
    stream: RngStream,
    negate: bool,
) -> Result<CopyTerm> {
    let scheme = config.scheme();
    let trace = if negate {
        net.forward_with(&sample.x, scheme, &mut Negated(stream))?
    } else {
        net.forward_with(&sample.x, scheme, &mut stream.clone())?
    };
    let loss = objective.evaluate(&trace.output, &sample.target)?;
    let per_sample_sign = config.sign == SignMode::PerSample;
    let layers = trace
        .layers
        .iter()
        .zip(net.layers())
        .map(|(t, params)| {
            let (z_theta, z_sigma) = match &t.noise {
                LayerNoise::PreActivation(eps) => {
                    let cols = t.input.len();
                    let mut z = Tensor2::zeros(eps.len(), cols);
                    let mut zs = Vec::with_capacity(eps.len());
                    for (i, (&e, &s)) in eps.iter().zip(&params.sigma).enumerate() {
                        let scale = e / s;
                        for (zij, &xj) in z.row_mut(i).iter_mut().zip(&t.input) {
                            *zij = xj * scale;
                        }
                        zs.push((e * e - 1.0) / s);
                    }
                    (z, Some(zs))
                }
                LayerNoise::Weight(e) => {
                    let mut z = e.clone();
                    let inv = 1.0 / net.sigma_w();
                    z.as_mut_slice().iter_mut().for_each(|v| *v *= inv);
                    (z, None)
                }
            };
            let theta = if per_sample_sign {
                ThetaDir::Sign(sign_encode_per_sample(&z_theta))
            } else {
                ThetaDir::Dense(z_theta)
            };
            LayerTerm { theta, z_sigma }
        })
        .collect();
    Ok(CopyTerm { loss, layers })
}

fn accumulate(acc: &mut GradEstimate, term: &CopyTerm) {
    let l = term.loss;
    for (g, t) in acc.layers.iter_mut().zip(&term.layers) {
        match &t.theta {
            ThetaDir::Dense(z) => {
                for (a, &v) in g.d_theta.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    *a += l * v;
                }
            }
            ThetaDir::Sign(s) => {
                for (a, &v) in g.d_theta.as_mut_slice().iter_mut().zip(s.as_slice()) {
                    *a += l * f64::from(v);
                }
            }
        }
        if let Some(zs) = &t.z_sigma {
            for (a, &v) in g.d_sigma.iter_mut().zip(zs) {
                *a += l * v;
            }
        }
    }
    acc.mean_loss += l;
}

/// Monte-Carlo gradient estimate of the mean batch loss.
///
/// `stream` carries the base seed and batch key; sample and copy keys are
/// filled in per evaluation.
pub fn estimate<E: CopyExecutor>(
    net: &NetworkSpec,
    batch: &[Sample],
    objective: &Objective,
    config: &EstimatorConfig,
    stream: &RngStream,
    exec: &E,
) -> Result<GradEstimate> {
    config.validate(net)?;
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let copies = config.copies;
    let total = batch.len() * copies;
    let mut acc = GradEstimate::zeros_like(net);
    let mut start = 0;
    while start < total {
        let len = CHUNK.min(total - start);
        let terms = exec.run(len, |j| {
            let job = start + j;
            let (n, c) = (job / copies, job % copies);
            let (key_copy, negate) = if config.antithetic { (c / 2, c % 2 == 1) } else { (c, false) };
            let s = stream.sample(n as u64).copy(key_copy as u64);
            copy_term(net, &batch[n], objective, config, s, negate)
        });
        for term in terms {
            accumulate(&mut acc, &term?);
        }
        start += len;
    }
    let inv = total as f64;
    let mut out = acc.map(|v| v / inv);
    out.copy_count = total;
    out.mean_loss = acc.mean_loss / inv;
    if config.kind == EstimatorKind::Es {
        out.zero_sigma();
    }
    if config.sign == SignMode::OfUpdate {
        let loss = out.mean_loss;
        out = sign_of_update(&out);
        out.copy_count = total;
        out.mean_loss = loss;
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("gradient estimate"));
    }
    Ok(out)
}

fn with_kind(config: &EstimatorConfig, kind: EstimatorKind) -> Result<EstimatorConfig> {
    if config.kind != kind {
        return Err(Error::InvalidArgument(alloc::format!(
            "expected a {} configuration, got {}",
            kind.name(),
            config.kind.name()
        )));
    }
    Ok(*config)
}

/// [`estimate`] restricted to pre-activation noise.
pub fn lr_estimate<E: CopyExecutor>(
    net: &NetworkSpec,
    batch: &[Sample],
    objective: &Objective,
    config: &EstimatorConfig,
    stream: &RngStream,
    exec: &E,
) -> Result<GradEstimate> {
    estimate(net, batch, objective, &with_kind(config, EstimatorKind::Lr)?, stream, exec)
}

/// [`estimate`] restricted to weight noise.
pub fn es_estimate<E: CopyExecutor>(
    net: &NetworkSpec,
    batch: &[Sample],
    objective: &Objective,
    config: &EstimatorConfig,
    stream: &RngStream,
    exec: &E,
) -> Result<GradEstimate> {
    estimate(net, batch, objective, &with_kind(config, EstimatorKind::Es)?, stream, exec)
}

/// [`estimate`] with weight noise up to `config.split` and pre-activation
/// noise after.
pub fn hybrid_estimate<E: CopyExecutor>(
    net: &NetworkSpec,
    batch: &[Sample],
    objective: &Objective,
    config: &EstimatorConfig,
    stream: &RngStream,
    exec: &E,
) -> Result<GradEstimate> {
    estimate(net, batch, objective, &with_kind(config, EstimatorKind::Hybrid)?, stream, exec)
}
