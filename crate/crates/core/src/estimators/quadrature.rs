//! Quadrature oracle for the expected sign-encoded direction.
//!
//! For a single neuron `v = ω x + σ ε` with smooth loss `f(v)` and score
//! `Z = x ε / σ`, the mean of `f(v) · sign(Z)` equals the derivative, taken
//! through the noise density only, of `E[f(v) / |Z|]`:
//!
//! ```text
//! G(δ) = ∫ f(ω x + σ ε) · σ / (|x| |ε|) · φ(ε - δ x / σ) dε,   J(ω) = G'(0)
//! ```
//!
//! `E[f / |Z|]` itself diverges logarithmically at `ε = 0` unless `f`
//! vanishes there, so the integral is truncated to `|ε| ≥ z_min`. The
//! truncation changes `J` by `O(z_min²)`. `G` is integrated with composite
//! Gauss–Legendre rules (geometric panels near the cut, uniform ones in the
//! tail) and differentiated by central differences.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::sign;
use crate::rng::RngStream;

pub const DEFAULT_Z_MIN: f64 = 1e-3;
const TAIL: f64 = 12.0;
const ORDER: usize = 16;
const REL_TOL: f64 = 1e-7;

/// One neuron with fixed input and noise scale and an arbitrary loss of the
/// pre-activation.
pub struct ScalarLrProblem<'a> {
    pub input: f64,
    pub sigma: f64,
    pub loss: &'a dyn Fn(f64) -> f64,
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI)
}

fn panels(z_min: f64, upper: f64, refine: usize) -> Vec<(f64, f64)> {
    let near = 24 * refine;
    let far = 24 * refine;
    let mut out = Vec::with_capacity(near + far);
    let ratio = libm::pow(1.0 / z_min, 1.0 / near as f64);
    let mut a = z_min;
    for _ in 0..near {
        let b = a * ratio;
        out.push((a, b.min(1.0)));
        a = b;
    }
    let step = (upper - 1.0) / far as f64;
    for k in 0..far {
        out.push((1.0 + k as f64 * step, 1.0 + (k + 1) as f64 * step));
    }
    out
}

fn truncated_integral(p: &ScalarLrProblem<'_>, omega: f64, shift: f64, z_min: f64, refine: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(ORDER);
    let upper = TAIL + shift.abs();
    let scale = p.sigma / p.input.abs();
    let mut total = 0.0;
    for side in [1.0, -1.0] {
        for (a, b) in panels(z_min, upper, refine) {
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (t, w) in nodes.iter().zip(&weights) {
                let e = side * (mid + half * t);
                let value = (p.loss)(omega * p.input + p.sigma * e) * scale / e.abs() * normal_pdf(e - shift);
                total += w * half * value;
            }
        }
    }
    total
}

fn central_difference(p: &ScalarLrProblem<'_>, omega: f64, z_min: f64, refine: usize) -> f64 {
    // δ enters only through the shift δ x / σ of the density
    let h = 1e-3 * p.sigma / p.input.abs();
    let shift = h * p.input / p.sigma;
    let up = truncated_integral(p, omega, shift, z_min, refine);
    let down = truncated_integral(p, omega, -shift, z_min, refine);
    (up - down) / (2.0 * h)
}

/// `∂/∂ω E[f / |Z|]` at `omega`, with `|ε| < z_min` excluded.
pub fn j_quadrature_oracle(p: &ScalarLrProblem<'_>, omega: f64, z_min: f64) -> Result<f64> {
    if p.input == 0.0 || !(p.sigma > 0.0) || !(z_min > 0.0 && z_min < 1.0) {
        return Err(Error::InvalidArgument("need nonzero input, positive sigma and 0 < z_min < 1".into()));
    }
    let coarse = central_difference(p, omega, z_min, 1);
    let fine = central_difference(p, omega, z_min, 2);
    if !fine.is_finite() || (fine - coarse).abs() > REL_TOL * fine.abs().max(1.0) {
        return Err(Error::QuadratureNonConvergence { estimate: coarse, refined: fine });
    }
    Ok(fine)
}

/// Monte-Carlo mean and standard error of `f(v) · sign(Z)` over `draws`
/// noise samples.
pub fn monte_carlo_sign_direction(
    p: &ScalarLrProblem<'_>,
    omega: f64,
    draws: usize,
    stream: &RngStream,
) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sq = 0.0;
    for c in 0..draws {
        let e = stream.copy(c as u64).gaussian_vec(1)[0];
        let v = (p.loss)(omega * p.input + p.sigma * e) * sign(p.input * e);
        sum += v;
        sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(ORDER);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
        // ∫ x^30 over [-1, 1] = 2 / 31 is exact for 16 points
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * libm::pow(*x, 30.0)).sum();
        assert!((m - 2.0 / 31.0).abs() < 1e-13);
    }

    #[test]
    fn closed_form_quadratic() {
        // f(v) = v²/2, x = 1, σ = 1: E[f · sign(ε)] = ω √(2/π)
        let f = |v: f64| 0.5 * v * v;
        let p = ScalarLrProblem { input: 1.0, sigma: 1.0, loss: &f };
        for omega in [-2.0, 0.5, 1.0, 3.0] {
            let j = j_quadrature_oracle(&p, omega, DEFAULT_Z_MIN).unwrap();
            let exact = omega * libm::sqrt(2.0 / core::f64::consts::PI);
            assert!((j - exact).abs() <= 0.01 * exact.abs(), "{omega}: {j} vs {exact}");
        }
    }

    #[test]
    fn constant_loss_is_zero() {
        let f = |_: f64| 3.0;
        let p = ScalarLrProblem { input: 0.7, sigma: 0.4, loss: &f };
        assert!(j_quadrature_oracle(&p, 1.3, DEFAULT_Z_MIN).unwrap().abs() < 1e-9);
        let (mean, _) = monte_carlo_sign_direction(&p, 1.3, 1000, &RngStream::new(0));
        assert!(mean.abs() <= 3.0);
    }

    #[test]
    fn rejects_degenerate_problem() {
        let f = |v: f64| v;
        let p = ScalarLrProblem { input: 0.0, sigma: 1.0, loss: &f };
        assert!(j_quadrature_oracle(&p, 1.0, DEFAULT_Z_MIN).is_err());
    }
}
