//! Distillation and mask-sparsity losses with analytic gradients.

use crate::error::{Error, Result};
use crate::render::{render, GradBuffers, MaskMode, RenderOptions};
use crate::scene::{Camera, GaussianScene, ImageRgb};
use crate::{sigmoid, sigmoid_prime};

/// Mean squared error between teacher and student renders, normalized by the
/// pixel count H*W (the channel sum is not averaged out).
pub fn distill_loss(teacher: &ImageRgb, student: &ImageRgb) -> Result<f64> {
    if teacher.width != student.width || teacher.height != student.height {
        return Err(Error::DimensionMismatch(format!(
            "teacher {}x{} vs student {}x{}",
            teacher.width, teacher.height, student.width, student.height
        )));
    }
    let hw = (teacher.width as f64) * (teacher.height as f64);
    let sum: f64 = teacher
        .data
        .iter()
        .zip(&student.data)
        .map(|(&t, &s)| (t - s) * (t - s))
        .sum();
    Ok(sum / hw)
}

/// Mean mask gate activation `(1/N) * sum sigmoid(m_n)`; the sparsity
/// pressure that drives gates toward zero.
pub fn mask_loss(scene: &GaussianScene) -> Result<f64> {
    let n = scene.count();
    if n == 0 {
        return Err(Error::UndefinedLoss("mask loss over zero Gaussians".into()));
    }
    Ok(scene.mask_logits.iter().map(|&m| sigmoid(m)).sum::<f64>() / n as f64)
}

/// Loss value split into its two terms.
#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    /// `distill + lambda * mask`.
    pub total: f64,
    pub distill: f64,
    pub mask: f64,
}

/// Render the student, compare against a fixed teacher image, and return the
/// combined loss with gradients on the four appearance groups (DC SH, rest
/// SH, opacity logits, mask logits). Geometry receives no gradient.
pub fn total_loss(
    student: &GaussianScene,
    camera: &Camera,
    teacher_img: &ImageRgb,
    lambda_mask: f64,
    mask_threshold: f64,
) -> Result<(LossBreakdown, GradBuffers)> {
    let opts = RenderOptions {
        want_depth: false,
        want_blend_weights: false,
        loss_grad: None,
        mask_mode: MaskMode::Hard,
        mask_threshold,
    };
    let fwd = render(student, camera, &opts)?;
    let distill = distill_loss(teacher_img, &fwd.color)?;

    // dL_distill/d(student pixel) = (2 / HW) * (s - t)
    let hw = (teacher_img.width as f64) * (teacher_img.height as f64);
    let loss_grad: Vec<f64> = fwd
        .color
        .data
        .iter()
        .zip(&teacher_img.data)
        .map(|(&s, &t)| 2.0 / hw * (s - t))
        .collect();
    let bwd = render(
        student,
        camera,
        &RenderOptions {
            loss_grad: Some(&loss_grad),
            ..opts
        },
    )?;
    let mut grad = bwd.grad.expect("gradients requested");

    let mask = mask_loss(student)?;
    let n = student.count() as f64;
    for (g, &m) in grad.d_mask_logit.iter_mut().zip(&student.mask_logits) {
        *g += lambda_mask * sigmoid_prime(m) / n;
    }

    Ok((
        LossBreakdown {
            total: distill + lambda_mask * mask,
            distill,
            mask,
        },
        grad,
    ))
}
