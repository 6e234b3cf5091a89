//! Exact chain-rule gradient of the noiseless mean batch loss.

use alloc::vec;
use alloc::vec::Vec;

use super::grad::GradEstimate;
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::loss::Objective;
use crate::network::NetworkSpec;

/// Gradient of `mean_n objective(net(x_n))` with ε = 0. The σ part is zero:
/// σ does not enter the noiseless loss.
pub fn bp_gradient(net: &NetworkSpec, batch: &[Sample], objective: &Objective) -> Result<GradEstimate> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut grad = GradEstimate::zeros_like(net);
    let mut total_loss = 0.0;
    for sample in batch {
        let trace = net.forward_clean(&sample.x)?;
        total_loss += objective.evaluate(&trace.output, &sample.target)?;
        let upstream = objective.output_gradient(&trace.output, &sample.target)?;
        let last = net.depth() - 1;
        let mut delta: Vec<f64> = upstream
            .iter()
            .zip(&trace.layers[last].pre_activation)
            .map(|(g, &v)| g * net.layer(last).activation.derivative(v))
            .collect();
        for l in (0..net.depth()).rev() {
            let input = &trace.layers[l].input;
            let d_theta = &mut grad.layers[l].d_theta;
            for (i, &d) in delta.iter().enumerate() {
                for (g, &x) in d_theta.row_mut(i).iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if l > 0 {
                let theta = &net.layer(l).theta;
                let prev = &trace.layers[l - 1].pre_activation;
                let act = net.layer(l - 1).activation;
                let mut next = vec![0.0; prev.len()];
                for (i, &d) in delta.iter().enumerate() {
                    for (j, n) in next.iter_mut().enumerate() {
                        *n += theta.get(i, j + 1) * d;
                    }
                }
                for (n, &v) in next.iter_mut().zip(prev) {
                    *n *= act.derivative(v);
                }
                delta = next;
            }
        }
    }
    let b = batch.len() as f64;
    let mut out = grad.map(|v| v / b);
    out.copy_count = batch.len();
    out.mean_loss = total_loss / b;
    Ok(out)
}

/// Mean noiseless loss over a batch.
pub fn mean_clean_loss(net: &NetworkSpec, batch: &[Sample], objective: &Objective) -> Result<f64> {
    let mut total = 0.0;
    for s in batch {
        total += objective.evaluate(&net.predict(&s.x)?, &s.target)?;
    }
    Ok(total / batch.len() as f64)
}
