//! Gradient-quality metrics.
//!
//! `Acc` and `Sta` are evaluated with grid-mean semantics: the sums run over
//! the sampled copy counts in the range and are normalised by the number of
//! sampled points.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::GradEstimate;
use crate::tensor::{dot, norm};

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape { expected: a.len(), got: b.len() });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `(n, cos_n)` pairs with strictly increasing `n`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricSeries {
    points: Vec<(usize, f64)>,
}

impl MetricSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut s = Self::new();
        for (n, c) in points {
            s.push(n, c)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, n: usize, cos: f64) -> Result<()> {
        if let Some(&(last, _)) = self.points.last() {
            if n <= last {
                return Err(Error::InvalidArgument("copy counts must increase".into()));
            }
        }
        if !(-1.0..=1.0).contains(&cos) {
            return Err(Error::InvalidArgument("cosine outside [-1, 1]".into()));
        }
        self.points.push((n, cos));
        Ok(())
    }

    pub fn points(&self) -> &[(usize, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Ordinary least squares line `cos ≈ intercept + slope · n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
}

impl LinearFit {
    pub fn at(&self, n: f64) -> f64 {
        self.intercept + self.slope * n
    }
}

pub fn linear_fit(series: &MetricSeries) -> Result<LinearFit> {
    let pts = series.points();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument("a line fit needs at least two points".into()));
    }
    let m = pts.len() as f64;
    let mean_n = pts.iter().map(|p| p.0 as f64).sum::<f64>() / m;
    let mean_c = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| { let d = p.0 as f64 - mean_n; d * d }).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("degenerate fit: all copy counts equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 as f64 - mean_n) * (p.1 - mean_c)).sum();
    let slope = sxy / sxx;
    Ok(LinearFit { intercept: mean_c - slope * mean_n, slope })
}

/// Mean of `cos_n` over the sampled `n` in `[n1, n2]`.
pub fn acc_metric(series: &MetricSeries, n1: usize, n2: usize) -> Result<f64> {
    if n1 > n2 {
        return Err(Error::InvalidArgument("empty copy range".into()));
    }
    let inside: Vec<f64> = series.points().iter().filter(|p| (n1..=n2).contains(&p.0)).map(|p| p.1).collect();
    if inside.is_empty() {
        return Err(Error::InvalidArgument("no samples in copy range".into()));
    }
    Ok(inside.iter().sum::<f64>() / inside.len() as f64)
}

/// Root-mean-square residual of `cos_n` around its least-squares line.
pub fn sta_metric(series: &MetricSeries) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::InvalidArgument("Sta needs at least three points".into()));
    }
    let fit = linear_fit(series)?;
    let ss: f64 = series.points().iter().map(|&(n, c)| { let r = c - fit.at(n as f64); r * r }).sum();
    Ok(libm::sqrt(ss / series.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerwiseCosine {
    /// Per layer, over the flattened θ block.
    pub per_layer: Vec<f64>,
    /// Over all θ coordinates.
    pub theta: f64,
    /// Over the full omega vector, σ included.
    pub omega: f64,
}

pub fn layerwise_cosine(est: &GradEstimate, oracle: &GradEstimate) -> Result<LayerwiseCosine> {
    if est.layers.len() != oracle.layers.len() {
        return Err(Error::Shape { expected: oracle.layers.len(), got: est.layers.len() });
    }
    let per_layer = est
        .layers
        .iter()
        .zip(&oracle.layers)
        .map(|(a, b)| cosine(a.d_theta.as_slice(), b.d_theta.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok(LayerwiseCosine {
        per_layer,
        theta: cosine(&est.theta_flat(), &oracle.theta_flat())?,
        omega: cosine(&est.flatten(), &oracle.flatten())?,
    })
}
