//! Per-Gaussian contribution scores over a set of views, used to decide
//! which splats to drop.
//!
//! Two scorers: accumulated blend weight (how much alpha a splat actually
//! contributes through occlusion) and the squared image Jacobian with
//! respect to each splat's density (a sensitivity measure that needs no
//! ground-truth images). Both are additive over views.

use crate::error::{Error, Result};
use crate::render::{self, RenderOptions};
use crate::scene::{Camera, GaussianScene};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    /// Sum over views and pixels of `alpha * T`.
    Opacity,
    /// Sum over views, pixels and channels of `(d image / d g)^2`.
    Hessian,
}

#[derive(Debug, Clone)]
pub struct ImportanceScores {
    pub kind: ScoreKind,
    pub scores: Vec<f64>,
    pub views_accumulated: usize,
}

/// Blend-weight importance. `beta > 0` multiplies each score by the
/// Gaussian's normalized 3D volume raised to `beta` (volume normalized by
/// the 90th-percentile volume and clamped to [0, 1]), which biases pruning
/// toward large dim splats.
pub fn score_opacity(
    scene: &GaussianScene,
    cameras: &[Camera],
    beta: f64,
) -> Result<ImportanceScores> {
    if cameras.is_empty() {
        return Err(Error::Config("importance scoring needs at least one view".into()));
    }
    if beta < 0.0 {
        return Err(Error::Config(format!("volume exponent beta {beta} must be >= 0")));
    }
    let mut scores = vec![0.0f64; scene.count()];
    for cam in cameras {
        let out = render::render(
            scene,
            cam,
            &RenderOptions {
                want_depth: false,
                want_blend_weights: true,
                ..RenderOptions::default()
            },
        )?;
        let bw = out.blend_weights.expect("requested blend weights");
        for (s, b) in scores.iter_mut().zip(&bw) {
            *s += b;
        }
    }
    if beta > 0.0 {
        apply_volume_weighting(scene, &mut scores, beta);
    }
    Ok(ImportanceScores {
        kind: ScoreKind::Opacity,
        scores,
        views_accumulated: cameras.len(),
    })
}

/// Squared-Jacobian importance; independent of any loss.
pub fn score_hessian(scene: &GaussianScene, cameras: &[Camera]) -> Result<ImportanceScores> {
    if cameras.is_empty() {
        return Err(Error::Config("importance scoring needs at least one view".into()));
    }
    let mut scores = vec![0.0f64; scene.count()];
    for cam in cameras {
        // gradients of a zero loss: only the loss-independent squared
        // Jacobian buffer is nonzero
        let lg = vec![0.0f64; cam.width as usize * cam.height as usize * 3];
        let out = render::render_backward(scene, cam, &lg)?;
        let g = out.grad.expect("backward requested");
        for (s, v) in scores.iter_mut().zip(&g.g_grad_sq) {
            *s += v;
        }
    }
    Ok(ImportanceScores {
        kind: ScoreKind::Hessian,
        scores,
        views_accumulated: cameras.len(),
    })
}

fn apply_volume_weighting(scene: &GaussianScene, scores: &mut [f64], beta: f64) {
    let n = scene.count();
    if n == 0 {
        return;
    }
    // volume ~ product of scales = exp(sum of log scales)
    let volumes: Vec<f64> = (0..n)
        .map(|i| {
            let ls = scene.log_scale(i);
            (ls[0] + ls[1] + ls[2]).exp()
        })
        .collect();
    let mut sorted = volumes.clone();
    sorted.sort_by(f64::total_cmp);
    let q90 = sorted[((0.9 * (n as f64 - 1.0)).round() as usize).min(n - 1)];
    for (s, v) in scores.iter_mut().zip(&volumes) {
        let norm = if q90 > 0.0 { (v / q90).clamp(0.0, 1.0) } else { 1.0 };
        *s *= norm.powf(beta);
    }
}

/// Indices of the `floor(fraction * N)` lowest-scoring Gaussians, ties going
/// to the lower index. Returned in ascending index order.
pub fn rank_bottom(scores: &[f64], fraction: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "prune fraction {fraction} outside [0, 1]"
        )));
    }
    let k = (fraction * scores.len() as f64).floor() as usize;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut bottom: Vec<usize> = order.into_iter().take(k).collect();
    bottom.sort_unstable();
    Ok(bottom)
}

/// `index,score` CSV rows for diagnostics.
pub fn scores_csv(scores: &ImportanceScores) -> String {
    let mut out = String::from("index,score\n");
    for (i, s) in scores.scores.iter().enumerate() {
        out.push_str(&format!("{i},{s}\n"));
    }
    out
}
