//! Projected SGD and the mini-batch training loop.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::data::{permutation, Dataset, Sample};
use crate::error::{Error, Result};
use crate::estimators::{bp_gradient, estimate, mean_clean_loss, CopyExecutor, EstimatorConfig, GradEstimate};
use crate::loss::Objective;
use crate::metrics::cosine;
use crate::network::NetworkSpec;
use crate::rng::RngStream;

pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
const SHUFFLE_DOMAIN: u64 = u64::MAX - 2;

/// Per-coordinate bounds for θ and σ.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProjectionBox {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

impl Default for ProjectionBox {
    fn default() -> Self {
        Self { theta_lo: -10.0, theta_hi: 10.0, sigma_lo: 1e-3, sigma_hi: 10.0 }
    }
}

impl ProjectionBox {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_lo < self.theta_hi && self.sigma_lo < self.sigma_hi && self.sigma_lo > 0.0) {
            return Err(Error::InvalidArgument("projection box needs lo < hi and sigma_lo > 0".into()));
        }
        Ok(())
    }

    pub fn contains(&self, omega: &[f64], theta_count: usize) -> bool {
        omega.iter().enumerate().all(|(d, &v)| {
            if d < theta_count {
                (self.theta_lo..=self.theta_hi).contains(&v)
            } else {
                (self.sigma_lo..=self.sigma_hi).contains(&v)
            }
        })
    }
}

/// Euclidean projection onto the box: clamp θ coordinates (the first
/// `theta_count`) and σ coordinates to their intervals.
pub fn project(omega: &[f64], theta_count: usize, bounds: &ProjectionBox) -> Vec<f64> {
    omega
        .iter()
        .enumerate()
        .map(|(d, &v)| {
            if d < theta_count {
                v.clamp(bounds.theta_lo, bounds.theta_hi)
            } else {
                v.clamp(bounds.sigma_lo, bounds.sigma_hi)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum StepSchedule {
    /// `γ_k = a / (k + k0)`, k counted from 0.
    RobbinsMonro { a: f64, k0: f64 },
    Constant { gamma: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Constant { gamma: 1e-3 }
    }
}

impl StepSchedule {
    pub fn step_size(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::RobbinsMonro { a, k0 } => a / (k as f64 + k0),
            StepSchedule::Constant { gamma } => gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::RobbinsMonro { a, k0 } => a > 0.0 && k0 > 0.0,
            StepSchedule::Constant { gamma } => gamma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("step sizes must be positive".into()))
        }
    }
}

/// `project(ω - γ_k g)`.
pub fn sgd_step(
    omega: &[f64],
    grad: &[f64],
    k: usize,
    schedule: &StepSchedule,
    bounds: &ProjectionBox,
    theta_count: usize,
) -> Result<Vec<f64>> {
    if omega.len() != grad.len() {
        return Err(Error::Shape { expected: omega.len(), got: grad.len() });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let gamma = schedule.step_size(k);
    let moved: Vec<f64> = omega.iter().zip(grad).map(|(w, g)| w - gamma * g).collect();
    Ok(project(&moved, theta_count, bounds))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "method"))]
pub enum GradientMethod {
    /// Exact gradient of the noiseless loss.
    Backprop,
    Estimator(EstimatorConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub method: GradientMethod,
    pub schedule: StepSchedule,
    pub bounds: ProjectionBox,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Keep σ fixed at its initial value.
    pub freeze_sigma: bool,
    /// Record the cosine between each step's direction and the backprop
    /// gradient at the same point.
    pub track_cosine: bool,
    pub divergence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: GradientMethod::Estimator(EstimatorConfig::default()),
            schedule: StepSchedule::default(),
            bounds: ProjectionBox::default(),
            epochs: 1,
            batch_size: 64,
            seed: 0,
            freeze_sigma: false,
            track_cosine: false,
            divergence_threshold: DIVERGENCE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub step_size: f64,
    pub grad_norm: f64,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none", default))]
    pub cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: Option<f64>,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("loss {loss} exceeded the divergence threshold at step {step}")]
    Diverged { step: usize, loss: f64, log: Box<TrainLog> },
    #[error(transparent)]
    Core(#[from] Error),
}

/// Fraction of samples whose argmax output matches the one-hot target.
/// `None` when the dataset carries no class labels.
pub fn accuracy(net: &NetworkSpec, data: &Dataset) -> Result<Option<f64>> {
    if data.is_empty() || data.samples.iter().any(|s| s.class().is_none()) {
        return Ok(None);
    }
    let mut hits = 0usize;
    for s in &data.samples {
        if Some(net.predict_class(&s.x)?) == s.class() {
            hits += 1;
        }
    }
    Ok(Some(hits as f64 / data.len() as f64))
}

/// Mini-batch projected SGD. Each epoch shuffles the training set and walks
/// it in consecutive batches; the final batch may be short.
pub fn train<E: CopyExecutor>(
    net: &mut NetworkSpec,
    data: &Dataset,
    validation: Option<&Dataset>,
    objective: &Objective,
    config: &TrainConfig,
    exec: &E,
) -> core::result::Result<TrainLog, TrainError> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()).into());
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()).into());
    }
    config.schedule.validate()?;
    config.bounds.validate()?;
    if let GradientMethod::Estimator(est) = &config.method {
        est.validate(net)?;
    }
    let theta_count = net.theta_count();
    let mut log = TrainLog::default();
    let mut k = 0usize;
    for epoch in 0..config.epochs {
        let order = permutation(data.len(), &RngStream::new(config.seed).batch(SHUFFLE_DOMAIN).sample(epoch as u64));
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| data.samples[i].clone()).collect();
            let mut grad: GradEstimate = match &config.method {
                GradientMethod::Backprop => bp_gradient(net, &batch, objective)?,
                GradientMethod::Estimator(est) => {
                    estimate(net, &batch, objective, est, &RngStream::new(config.seed).batch(k as u64), exec)?
                }
            };
            if config.freeze_sigma {
                grad.zero_sigma();
            }
            let loss = grad.mean_loss;
            let cosine_to_bp = if config.track_cosine {
                let oracle = bp_gradient(net, &batch, objective)?;
                cosine(&grad.theta_flat(), &oracle.theta_flat()).ok()
            } else {
                None
            };
            let flat = grad.flatten();
            let step_size = config.schedule.step_size(k);
            log.steps.push(StepRecord {
                step: k,
                epoch,
                loss,
                step_size,
                grad_norm: crate::tensor::norm(&flat),
                cosine: cosine_to_bp,
            });
            if !loss.is_finite() || loss > config.divergence_threshold {
                return Err(TrainError::Diverged { step: k, loss, log: Box::new(log) });
            }
            let omega = sgd_step(&net.flat_params(), &flat, k, &config.schedule, &config.bounds, theta_count)?;
            net.set_flat_params(&omega)?;
            epoch_loss += loss;
            batches += 1;
            k += 1;
        }
        log.epochs.push(EpochRecord {
            epoch,
            mean_loss: epoch_loss / batches as f64,
            train_accuracy: accuracy(net, data)?,
            validation_accuracy: match validation {
                Some(v) => accuracy(net, v)?,
                None => None,
            },
        });
    }
    Ok(log)
}

/// Iterates visited by [`descend`]. `points[k]` is ω after k steps and
/// `losses[k]` the noiseless loss there.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub points: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    /// Step at which the loss first left the divergence threshold, if any.
    pub diverged_at: Option<usize>,
}

/// Settings for [`descend`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConfig {
    pub method: GradientMethod,
    pub schedule: StepSchedule,
    pub bounds: ProjectionBox,
    pub steps: usize,
    pub seed: u64,
    pub freeze_sigma: bool,
    pub divergence_threshold: f64,
}

/// Projected SGD on one fixed batch, recording every iterate. Stops early
/// when the noiseless loss becomes non-finite or exceeds the threshold.
pub fn descend<E: CopyExecutor>(
    net: &mut NetworkSpec,
    batch: &[Sample],
    objective: &Objective,
    config: &DescentConfig,
    exec: &E,
) -> Result<Trajectory> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("batch is empty".into()));
    }
    config.schedule.validate()?;
    config.bounds.validate()?;
    if let GradientMethod::Estimator(est) = &config.method {
        est.validate(net)?;
    }
    let theta_count = net.theta_count();
    let mut out = Trajectory::default();
    let mut loss = mean_clean_loss(net, batch, objective)?;
    out.points.push(net.flat_params());
    out.losses.push(loss);
    for k in 0..config.steps {
        if !loss.is_finite() || loss > config.divergence_threshold {
            out.diverged_at = Some(k);
            break;
        }
        let mut grad = match &config.method {
            GradientMethod::Backprop => bp_gradient(net, batch, objective)?,
            GradientMethod::Estimator(est) => {
                estimate(net, batch, objective, est, &RngStream::new(config.seed).batch(k as u64), exec)?
            }
        };
        if config.freeze_sigma {
            grad.zero_sigma();
        }
        let omega = sgd_step(&net.flat_params(), &grad.flatten(), k, &config.schedule, &config.bounds, theta_count)?;
        net.set_flat_params(&omega)?;
        loss = mean_clean_loss(net, batch, objective)?;
        out.points.push(omega);
        out.losses.push(loss);
    }
    if out.diverged_at.is_none() && (!loss.is_finite() || loss > config.divergence_threshold) {
        out.diverged_at = Some(config.steps);
    }
    Ok(out)
}
