use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Central differences `(f(ω + h e_d) - f(ω - h e_d)) / 2h` per coordinate.
pub fn finite_difference_gradient(
    mut f: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for d in 0..params.len() {
        work[d] = params[d] + h;
        let up = f(&work);
        work[d] = params[d] - h;
        let down = f(&work);
        work[d] = params[d];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// `max_d |a_d - b_d| / max(|a_d|, |b_d|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
