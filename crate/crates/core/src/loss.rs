//! Objectives evaluated on the network output.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, softmax};

/// Clamp magnitude used when a bounded loss is requested without a value.
pub const DEFAULT_LOSS_CLAMP: f64 = 1e4;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum ObjectiveKind {
    /// Softmax cross-entropy against a one-hot label.
    CrossEntropy { classes: usize },
    /// Beale's function of the two network outputs `(x, y)`; no target.
    Beale,
    /// `sum_i curvature_i * (v_i - center_i)^2`; no target.
    Quadratic { center: Vec<f64>, curvature: Vec<f64> },
    /// `sum_i weights_i * v_i`; no target.
    Linear { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Objective {
    pub kind: ObjectiveKind,
    /// When set, the loss is clipped to `[-M, M]`.
    pub clamp: Option<f64>,
}

impl Objective {
    pub fn cross_entropy(classes: usize) -> Self {
        Self { kind: ObjectiveKind::CrossEntropy { classes }, clamp: None }
    }

    pub fn beale() -> Self {
        Self { kind: ObjectiveKind::Beale, clamp: None }
    }

    pub fn quadratic(center: Vec<f64>, curvature: Vec<f64>) -> Self {
        Self { kind: ObjectiveKind::Quadratic { center, curvature }, clamp: None }
    }

    pub fn linear(weights: Vec<f64>) -> Self {
        Self { kind: ObjectiveKind::Linear { weights }, clamp: None }
    }

    pub fn with_clamp(mut self, m: f64) -> Self {
        self.clamp = Some(m);
        self
    }

    /// Expected length of the network output.
    pub fn output_dim(&self) -> usize {
        match &self.kind {
            ObjectiveKind::CrossEntropy { classes } => *classes,
            ObjectiveKind::Beale => 2,
            ObjectiveKind::Quadratic { center, .. } => center.len(),
            ObjectiveKind::Linear { weights } => weights.len(),
        }
    }

    fn raw(&self, output: &[f64], target: &[f64]) -> Result<f64> {
        self.check(output)?;
        match &self.kind {
            ObjectiveKind::CrossEntropy { .. } => cross_entropy(output, target),
            ObjectiveKind::Beale => Ok(beale(output[0], output[1])),
            ObjectiveKind::Quadratic { center, curvature } => Ok(output
                .iter()
                .zip(center)
                .zip(curvature)
                .map(|((v, c), k)| k * (v - c) * (v - c))
                .sum()),
            ObjectiveKind::Linear { weights } => Ok(crate::tensor::dot(output, weights)),
        }
    }

    pub fn evaluate(&self, output: &[f64], target: &[f64]) -> Result<f64> {
        let l = self.raw(output, target)?;
        if !l.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        Ok(match self.clamp {
            Some(m) => l.clamp(-m, m),
            None => l,
        })
    }

    /// Gradient of [`Objective::evaluate`] with respect to the output. Zero
    /// where the clamp is active.
    pub fn output_gradient(&self, output: &[f64], target: &[f64]) -> Result<Vec<f64>> {
        let l = self.raw(output, target)?;
        if let Some(m) = self.clamp {
            if l.abs() > m {
                return Ok(vec![0.0; output.len()]);
            }
        }
        Ok(match &self.kind {
            ObjectiveKind::CrossEntropy { .. } => {
                let mut p = softmax(output);
                for (pi, oi) in p.iter_mut().zip(target) {
                    *pi -= oi;
                }
                p
            }
            ObjectiveKind::Beale => {
                let (gx, gy) = beale_gradient(output[0], output[1]);
                vec![gx, gy]
            }
            ObjectiveKind::Quadratic { center, curvature } => output
                .iter()
                .zip(center)
                .zip(curvature)
                .map(|((v, c), k)| 2.0 * k * (v - c))
                .collect(),
            ObjectiveKind::Linear { weights } => weights.clone(),
        })
    }

    fn check(&self, output: &[f64]) -> Result<()> {
        if output.len() != self.output_dim() {
            return Err(Error::Shape { expected: self.output_dim(), got: output.len() });
        }
        if let ObjectiveKind::Quadratic { center, curvature } = &self.kind {
            if curvature.len() != center.len() {
                return Err(Error::Shape { expected: center.len(), got: curvature.len() });
            }
        }
        Ok(())
    }
}

fn check_one_hot(label: &[f64]) -> Result<usize> {
    let mut hot = None;
    for (i, &o) in label.iter().enumerate() {
        if o == 1.0 {
            if hot.is_some() {
                return Err(Error::NotOneHot);
            }
            hot = Some(i);
        } else if o != 0.0 {
            return Err(Error::NotOneHot);
        }
    }
    hot.ok_or(Error::NotOneHot)
}

/// `-sum_i o_i ln softmax(output)_i` for a one-hot `label`.
pub fn cross_entropy(output: &[f64], label: &[f64]) -> Result<f64> {
    if output.len() != label.len() {
        return Err(Error::Shape { expected: output.len(), got: label.len() });
    }
    let k = check_one_hot(label)?;
    Ok((log_sum_exp(output) - output[k]).max(0.0))
}

pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[class] = 1.0;
    v
}

pub fn beale(x: f64, y: f64) -> f64 {
    let r1 = 1.5 - x + x * y;
    let r2 = 2.25 - x + x * y * y;
    let r3 = 2.625 - x + x * y * y * y;
    r1 * r1 + r2 * r2 + r3 * r3
}

pub fn beale_gradient(x: f64, y: f64) -> (f64, f64) {
    let r1 = 1.5 - x + x * y;
    let r2 = 2.25 - x + x * y * y;
    let r3 = 2.625 - x + x * y * y * y;
    let gx = 2.0 * (r1 * (y - 1.0) + r2 * (y * y - 1.0) + r3 * (y * y * y - 1.0));
    let gy = 2.0 * x * (r1 + 2.0 * r2 * y + 3.0 * r3 * y * y);
    (gx, gy)
}
