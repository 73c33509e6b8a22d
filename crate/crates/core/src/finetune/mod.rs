//! Appearance-only fine-tuning against a teacher scene.
//!
//! The student is supervised by renders of a (typically larger) teacher
//! scene from the training cameras and from randomly perturbed pseudo
//! views. Only spherical-harmonics coefficients, opacity logits and the
//! degree-3 mask logits move; geometry stays byte-identical. The mask
//! gates are trained straight-through: binary in the forward render,
//! `sigmoid'` in the backward pass, plus a sparsity pressure that pushes
//! unneeded degree-3 bands off.

mod adam;
mod loss;

pub use adam::{adam_step, AdamParams, AdamState};
pub use loss::{distill_loss, mask_loss, total_loss, LossBreakdown};

use crate::error::{Error, Result};
use crate::prune::mask_flags;
use crate::render::{render, MaskMode, RenderOptions};
use crate::rng::SplitMix64;
use crate::scene::{Camera, GaussianScene};
use crate::DEFAULT_MASK_THRESHOLD;

/// Knobs for [`run_distill_finetune`]. Defaults are tuned for desk-scale
/// scenes (hundreds of Gaussians, tens of pixels across); every field is
/// exposed through the CLI config.
#[derive(Debug, Clone, Copy)]
pub struct FinetuneConfig {
    /// Weight of the mask sparsity term.
    pub lambda_mask: f64,
    /// Std-dev of the pseudo-view translation noise. `None` resolves to 2%
    /// of the teacher AABB diagonal when the loop starts.
    pub noise_sigma: Option<f64>,
    /// Probability that an iteration trains on a perturbed pseudo view
    /// instead of the raw training camera.
    pub pseudo_prob: f64,
    pub iterations: usize,
    pub lr_sh_dc: f64,
    pub lr_sh_rest: f64,
    pub lr_opacity: f64,
    pub lr_mask: f64,
    pub mask_threshold: f64,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            lambda_mask: 5e-4,
            noise_sigma: None,
            pseudo_prob: 0.5,
            iterations: 3000,
            lr_sh_dc: 2.5e-3,
            lr_sh_rest: 1.25e-4,
            lr_opacity: 5e-2,
            lr_mask: 1e-2,
            mask_threshold: DEFAULT_MASK_THRESHOLD,
            seed: 0,
        }
    }
}

impl FinetuneConfig {
    fn validate(&self) -> Result<()> {
        let rates = [
            ("lambda_mask", self.lambda_mask),
            ("lr_sh_dc", self.lr_sh_dc),
            ("lr_sh_rest", self.lr_sh_rest),
            ("lr_opacity", self.lr_opacity),
            ("lr_mask", self.lr_mask),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if let Some(s) = self.noise_sigma {
            if !(s >= 0.0) {
                return Err(Error::Config(format!("noise_sigma must be >= 0, got {s}")));
            }
        }
        if !(0.0..=1.0).contains(&self.pseudo_prob) {
            return Err(Error::Config(format!(
                "pseudo_prob must be in [0,1], got {}",
                self.pseudo_prob
            )));
        }
        Ok(())
    }
}

/// Per-iteration training record; serialized as one CSV row.
#[derive(Debug, Clone, Copy)]
pub struct ProgressRow {
    pub iteration: usize,
    /// Total loss at iteration entry (before this iteration's update).
    pub loss: f64,
    pub distill: f64,
    pub mask_loss: f64,
    /// Fraction of Gaussians whose degree-3 band is currently gated off.
    pub masked_fraction: f64,
}

/// CSV serialization of a progress log, one row per iteration.
pub fn progress_csv(rows: &[ProgressRow]) -> String {
    let mut out = String::from("iter,loss,distill,mask_loss,masked_fraction\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iteration, r.loss, r.distill, r.mask_loss, r.masked_fraction
        ));
    }
    out
}

/// Perturb a camera's translation with i.i.d. Gaussian noise of std-dev
/// `sigma`; rotation and intrinsics are untouched.
pub fn sample_pseudo_pose(camera: &Camera, sigma: f64, rng: &mut SplitMix64) -> Camera {
    let mut out = camera.clone();
    for t in &mut out.translation {
        *t += sigma * rng.normal();
    }
    out
}

/// Fraction of Gaussians whose degree-3 band is gated off at `threshold`.
pub fn masked_fraction(scene: &GaussianScene, threshold: f64) -> f64 {
    if scene.count() == 0 {
        return 0.0;
    }
    let off = mask_flags(scene, threshold).iter().filter(|&&on| !on).count();
    off as f64 / scene.count() as f64
}

/// Distillation fine-tuning loop. Each iteration samples one training
/// camera (possibly perturbed into a pseudo view), renders the teacher at
/// it, and takes one optimizer step on the student's appearance parameters
/// toward the teacher image plus the mask sparsity objective.
pub fn run_distill_finetune(
    student: &GaussianScene,
    teacher: &GaussianScene,
    cameras: &[Camera],
    cfg: &FinetuneConfig,
) -> Result<(GaussianScene, Vec<ProgressRow>)> {
    cfg.validate()?;
    if cameras.is_empty() {
        return Err(Error::Config("fine-tune needs at least one camera".into()));
    }
    if cfg.iterations == 0 {
        return Ok((student.clone(), Vec::new()));
    }
    let n = student.count();
    if n == 0 {
        return Err(Error::UndefinedLoss(
            "cannot fine-tune an empty student scene".into(),
        ));
    }
    let sigma = cfg
        .noise_sigma
        .unwrap_or_else(|| 0.02 * teacher.aabb_diagonal());

    let mut scene = student.clone();
    let mut rng = SplitMix64::new(cfg.seed);
    let hp = AdamParams::default();
    let mut st_dc = AdamState::new(3 * n);
    let mut st_rest = AdamState::new(crate::scene::SH_REST_WIDTH * n);
    let mut st_op = AdamState::new(n);
    let mut st_mask = AdamState::new(n);
    let teacher_opts = RenderOptions {
        want_depth: false,
        want_blend_weights: false,
        loss_grad: None,
        mask_mode: MaskMode::Hard,
        mask_threshold: cfg.mask_threshold,
    };

    let mut rows = Vec::with_capacity(cfg.iterations);
    for iter in 0..cfg.iterations {
        let cam_idx = rng.uniform_index(cameras.len());
        let camera = if rng.next_f64() < cfg.pseudo_prob {
            sample_pseudo_pose(&cameras[cam_idx], sigma, &mut rng)
        } else {
            cameras[cam_idx].clone()
        };
        let teacher_img = render(teacher, &camera, &teacher_opts)?.color;
        let (parts, grad) = total_loss(
            &scene,
            &camera,
            &teacher_img,
            cfg.lambda_mask,
            cfg.mask_threshold,
        )?;
        rows.push(ProgressRow {
            iteration: iter,
            loss: parts.total,
            distill: parts.distill,
            mask_loss: parts.mask,
            masked_fraction: masked_fraction(&scene, cfg.mask_threshold),
        });
        adam_step(&mut scene.sh_dc, &grad.d_sh_dc, &mut st_dc, cfg.lr_sh_dc, &hp)?;
        adam_step(
            &mut scene.sh_rest,
            &grad.d_sh_rest,
            &mut st_rest,
            cfg.lr_sh_rest,
            &hp,
        )?;
        adam_step(
            &mut scene.opacity_logits,
            &grad.d_opacity_logit,
            &mut st_op,
            cfg.lr_opacity,
            &hp,
        )?;
        adam_step(
            &mut scene.mask_logits,
            &grad.d_mask_logit,
            &mut st_mask,
            cfg.lr_mask,
            &hp,
        )?;
    }
    Ok((scene, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit;

    #[test]
    fn zero_iterations_is_identity() {
        let (scene, camera) = testkit::gradcheck_setup(5, 31);
        let cfg = FinetuneConfig {
            iterations: 0,
            ..FinetuneConfig::default()
        };
        let (out, rows) = run_distill_finetune(&scene, &scene, &[camera], &cfg).unwrap();
        assert_eq!(out, scene);
        assert!(rows.is_empty());
    }

    #[test]
    fn pseudo_pose_sigma_zero_is_identity() {
        let (_, camera) = testkit::gradcheck_setup(1, 32);
        let mut rng = SplitMix64::new(7);
        let p = sample_pseudo_pose(&camera, 0.0, &mut rng);
        assert_eq!(p.translation, camera.translation);
        assert_eq!(p.rotation, camera.rotation);
    }

    #[test]
    fn pseudo_pose_variance_matches() {
        let (_, camera) = testkit::gradcheck_setup(1, 33);
        let mut rng = SplitMix64::new(99);
        let sigma = 0.37;
        let n = 100_000;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let p = sample_pseudo_pose(&camera, sigma, &mut rng);
            for k in 0..3 {
                let d = p.translation[k] - camera.translation[k];
                sum_sq += d * d;
            }
        }
        let var = sum_sq / (3.0 * n as f64);
        assert!(
            (var - sigma * sigma).abs() < 0.05 * sigma * sigma,
            "var {var} vs {}",
            sigma * sigma
        );
    }

    #[test]
    fn geometry_is_frozen() {
        let (scene, camera) = testkit::gradcheck_setup(6, 34);
        let cfg = FinetuneConfig {
            iterations: 25,
            ..FinetuneConfig::default()
        };
        let (out, rows) = run_distill_finetune(&scene, &scene, &[camera], &cfg).unwrap();
        assert_eq!(out.positions, scene.positions);
        assert_eq!(out.rotation_params, scene.rotation_params);
        assert_eq!(out.log_scales, scene.log_scales);
        assert_eq!(rows.len(), 25);
        // the appearance groups did move
        assert_ne!(out.mask_logits, scene.mask_logits);
    }

    #[test]
    fn self_distillation_decreases_mask_loss() {
        let (scene, camera) = testkit::gradcheck_setup(8, 35);
        let cfg = FinetuneConfig {
            iterations: 101,
            lambda_mask: 5e-4,
            ..FinetuneConfig::default()
        };
        let (_, rows) = run_distill_finetune(&scene, &scene, &[camera], &cfg).unwrap();
        assert!(
            rows[100].mask_loss < rows[0].mask_loss,
            "mask loss {} -> {}",
            rows[0].mask_loss,
            rows[100].mask_loss
        );
    }

    #[test]
    fn same_seed_same_result() {
        let (scene, camera) = testkit::gradcheck_setup(4, 36);
        let cfg = FinetuneConfig {
            iterations: 10,
            ..FinetuneConfig::default()
        };
        let cams = [camera];
        let (a, ra) = run_distill_finetune(&scene, &scene, &cams, &cfg).unwrap();
        let (b, rb) = run_distill_finetune(&scene, &scene, &cams, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.len(), rb.len());
        for (x, y) in ra.iter().zip(&rb) {
            assert_eq!(x.loss, y.loss);
        }
    }

    #[test]
    fn progress_csv_shape() {
        let rows = vec![ProgressRow {
            iteration: 0,
            loss: 0.5,
            distill: 0.25,
            mask_loss: 0.5,
            masked_fraction: 0.0,
        }];
        let csv = progress_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iter,loss,distill,mask_loss,masked_fraction"
        );
        assert_eq!(lines.next().unwrap(), "0,0.5,0.25,0.5,0");
    }
}
