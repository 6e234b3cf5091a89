//! Backpropagation-free training primitives built on likelihood-ratio (LR)
//! gradient estimation.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`tensor`], [`rng`], [`numerics`]: dense arrays, counter-keyed Gaussian
//!   streams, activations and softmax.
//! - [`network`]: multilayer perceptron forward passes with pre-activation
//!   noise (LR), weight noise (ES) or a layer split of both (Hybrid).
//! - [`loss`]: cross-entropy, Beale and a separable quadratic objective.
//! - [`estimators`]: LR / ES / Hybrid Monte-Carlo estimators, the per-sample
//!   sign encoding, a backprop oracle, central differences and a quadrature
//!   oracle for the sign-encoded direction.
//! - [`optimizer`]: projected SGD with Robbins–Monro schedules and the
//!   mini-batch training loop.
//! - [`metrics`]: cosine similarity, `Acc` and `Sta` summaries.
//! - [`pipeline`]: a unit-time list-scheduling simulator comparing the
//!   backprop and LR task graphs of a bucketed pipeline.
//!
//! Parameters are flattened in "omega order": every layer's `theta` block
//! (row-major, bias in column 0) first, then every layer's `sigma` vector.
//!
//! IO, file formats, thread pools and the command line live in the `signlr`
//! companion crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod error;
pub mod estimators;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod numerics;
pub mod optimizer;
pub mod pipeline;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use estimators::{
    bp_gradient, estimate, CopyExecutor, EstimatorConfig, EstimatorKind, GradEstimate, LayerGrad,
    Serial, SignGrad, SignMode,
};
pub use loss::{Objective, ObjectiveKind};
pub use network::{Activation, ForwardTrace, LayerParams, NetworkSpec};
pub use rng::{NoiseKey, RngStream};
pub use tensor::{Tensor1, Tensor2};
