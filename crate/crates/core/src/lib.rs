//! Codec and benchmark library for 3D Gaussian splat scenes.
//!
//! The pipeline this library implements: load a splat scene ([`io`]),
//! score each Gaussian's contribution to the rendered images
//! ([`importance`]), drop the cheap ones ([`prune`]), fine-tune the
//! survivors against the original scene while learning a per-Gaussian
//! mask over the highest spherical-harmonics band ([`finetune`]),
//! then pack everything into a single self-contained bundle via
//! quantization, vector quantization and entropy coding ([`codec`]).
//! [`render`] is the differentiable CPU rasterizer everything leans on,
//! [`metrics`] judges the result, and [`scheduler`] drives iteration
//! plans for training-style loops.

pub mod codec;
pub mod error;
pub mod finetune;
pub mod fixtures;
pub mod importance;
pub mod io;
pub mod metrics;
pub mod prune;
pub mod render;
pub mod rng;
pub mod scene;
pub mod scheduler;
pub mod testkit;

pub use error::{Error, Result};
pub use scene::{Camera, GaussianScene, ImageRgb};

/// Mask logits at or below `sigmoid(m) <= threshold` switch a Gaussian's
/// degree-3 SH band off. 0.01 keeps the band unless training actively
/// pushes the logit down.
pub const DEFAULT_MASK_THRESHOLD: f64 = 0.01;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative of [`sigmoid`].
#[inline]
pub fn sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// Inverse of [`sigmoid`]; `p` must lie strictly inside (0, 1).
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
