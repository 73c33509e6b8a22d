//! Differentiable CPU splat rasterizer.
//!
//! Forward: project each Gaussian to an image-plane Gaussian, sort by view
//! depth, alpha-composite front to back per pixel over 16x16 tiles.
//! Backward: analytic gradients for the appearance parameters (SH DC and
//! rest, opacity logit, degree-3 mask logit) plus the per-Gaussian squared
//! image Jacobian with respect to the Gaussian's screen-space density, which
//! importance scoring consumes.
//!
//! Determinism contract: output is a pure function of (scene, camera,
//! options) and is invariant under permutation of the scene arrays — splats
//! are globally re-sorted by (depth, content hash), and all accumulation
//! orders are fixed regardless of thread count.

mod composite;
pub mod sh;

use crate::error::{Error, Result};
use crate::scene::{Camera, GaussianScene, ImageRgb};
use crate::{sigmoid, DEFAULT_MASK_THRESHOLD};

/// Contributions with `alpha` below this are skipped entirely.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
/// Alpha is clamped to this ceiling so transmittance never hits zero.
pub const ALPHA_MAX: f64 = 0.99;
/// Per-pixel traversal stops once transmittance drops below this.
pub const TRANSMITTANCE_MIN: f64 = 1e-4;
/// Splats project with this isotropic dilation added to the 2D covariance
/// diagonal (an antialiasing floor of ~0.55 px standard deviation).
pub const COV2D_DILATION: f64 = 0.3;
/// Side length of the rasterization tiles.
pub const TILE_SIZE: usize = 16;
/// Camera-space near plane: splats at or behind it are invisible.
pub const NEAR_PLANE: f64 = 0.01;

/// How the degree-3 SH mask enters the forward pass.
#[derive(Debug, Clone, Copy)]
pub enum MaskMode<'a> {
    /// Binary gate: the band is on iff `sigmoid(mask_logit) > threshold`.
    /// This is the production forward; its backward is the straight-through
    /// estimate `sigmoid'(mask_logit)`.
    Hard,
    /// Band weight `sigmoid(mask_logit) + offset[i]`. With offsets frozen at
    /// `hard - sigmoid` from a reference scene this is the differentiable
    /// surrogate whose finite differences the straight-through gradient must
    /// match; used by gradient checks.
    SoftSte(&'a [f64]),
    /// Masking disabled: the band is always on.
    Off,
}

#[derive(Debug, Clone, Copy)]
pub struct RenderOptions<'a> {
    pub want_depth: bool,
    pub want_blend_weights: bool,
    /// dL/d(output image), length `h * w * 3`. Present iff gradients are
    /// requested; the squared-Jacobian buffer is filled either way when this
    /// is present.
    pub loss_grad: Option<&'a [f64]>,
    pub mask_mode: MaskMode<'a>,
    pub mask_threshold: f64,
}

impl Default for RenderOptions<'static> {
    fn default() -> Self {
        RenderOptions {
            want_depth: true,
            want_blend_weights: false,
            loss_grad: None,
            mask_mode: MaskMode::Hard,
            mask_threshold: DEFAULT_MASK_THRESHOLD,
        }
    }
}

/// Parameter gradients from a backward pass. Layouts match the scene arrays.
#[derive(Debug, Clone)]
pub struct GradBuffers {
    pub d_sh_dc: Vec<f64>,
    pub d_sh_rest: Vec<f64>,
    pub d_opacity_logit: Vec<f64>,
    pub d_mask_logit: Vec<f64>,
    /// Sum over pixels and channels of the squared derivative of the output
    /// image with respect to this Gaussian's screen-space density value.
    /// Independent of `loss_grad`.
    pub g_grad_sq: Vec<f64>,
}

impl GradBuffers {
    fn zeros(n: usize) -> Self {
        GradBuffers {
            d_sh_dc: vec![0.0; 3 * n],
            d_sh_rest: vec![0.0; crate::scene::SH_REST_WIDTH * n],
            d_opacity_logit: vec![0.0; n],
            d_mask_logit: vec![0.0; n],
            g_grad_sq: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    /// Composited color, clamped to [0, 1].
    pub color: ImageRgb,
    /// Alpha-weighted expected depth per pixel (empty unless requested).
    pub depth: Vec<f64>,
    /// Remaining transmittance per pixel.
    pub transmittance: Vec<f64>,
    /// Present iff `loss_grad` was supplied.
    pub grad: Option<GradBuffers>,
    /// Per-Gaussian accumulated blend weight (sum of alpha * T over pixels),
    /// present iff requested.
    pub blend_weights: Option<Vec<f64>>,
}

/// One Gaussian's projection into a camera.
#[derive(Debug, Clone, Copy)]
pub struct SplatProjection {
    pub visible: bool,
    pub mu2d: [f64; 2],
    /// Symmetric 2x2 image-plane covariance, dilation included.
    pub cov2d: [[f64; 2]; 2],
    /// Camera-space z.
    pub depth: f64,
    /// SH color with the +0.5 offset applied, before the zero clamp. Uses
    /// the hard mask at the default threshold.
    pub color: [f64; 3],
    pub opacity: f64,
}

/// Project Gaussian `index` into `camera`.
pub fn project(scene: &GaussianScene, camera: &Camera, index: usize) -> Result<SplatProjection> {
    if index >= scene.count() {
        return Err(Error::IndexOutOfRange(format!(
            "gaussian {index} of {}",
            scene.count()
        )));
    }
    camera.validate()?;
    let core = project_core(scene, camera, index)?;
    if !core.visible {
        return Ok(SplatProjection {
            visible: false,
            mu2d: [0.0; 2],
            cov2d: [[0.0; 2]; 2],
            depth: core.t[2],
            color: [0.0; 3],
            opacity: sigmoid(scene.opacity_logits[index]),
        });
    }
    let center = camera.center();
    let basis = basis_for(scene, index, center);
    let w = if sigmoid(scene.mask_logits[index]) > DEFAULT_MASK_THRESHOLD {
        1.0
    } else {
        0.0
    };
    let (color, _) = sh_color(scene, index, &basis, w);
    Ok(SplatProjection {
        visible: true,
        mu2d: core.mu,
        cov2d: [[core.cov[0], core.cov[1]], [core.cov[1], core.cov[2]]],
        depth: core.t[2],
        color,
        opacity: sigmoid(scene.opacity_logits[index]),
    })
}

/// Unnormalized Gaussian density of a projected splat at image point `p`:
/// `exp(-0.5 * d^T cov2d^-1 d)`. Errors unless `cov2d` is positive definite.
pub fn splat_value(proj: &SplatProjection, p: [f64; 2]) -> Result<f64> {
    let a = proj.cov2d[0][0];
    let b = proj.cov2d[0][1];
    let c = proj.cov2d[1][1];
    let det = a * c - b * b;
    if !(det > 0.0) || !(a > 0.0) {
        return Err(Error::DegenerateSplat(format!(
            "2d covariance not positive definite (det {det})"
        )));
    }
    let dx = p[0] - proj.mu2d[0];
    let dy = p[1] - proj.mu2d[1];
    let q = -0.5 * (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
    Ok(q.exp())
}

/// Render `scene` from `camera`.
pub fn render(scene: &GaussianScene, camera: &Camera, opts: &RenderOptions) -> Result<RenderOutput> {
    camera.validate()?;
    if let Some(v) = scene.validate().first() {
        return Err(Error::InvalidScene(format!("{}: {}", v.field, v.detail)));
    }
    let n_px = camera.width as usize * camera.height as usize;
    if let Some(lg) = opts.loss_grad {
        if lg.len() != n_px * 3 {
            return Err(Error::ShapeMismatch(format!(
                "loss_grad length {} != {}",
                lg.len(),
                n_px * 3
            )));
        }
    }
    if let MaskMode::SoftSte(offsets) = opts.mask_mode {
        if offsets.len() != scene.count() {
            return Err(Error::ShapeMismatch(format!(
                "mask offsets length {} != {}",
                offsets.len(),
                scene.count()
            )));
        }
    }
    composite::run(scene, camera, opts)
}

/// Original indices of the visible splats in the order they composite
/// (front to back, content-hash tie-break). Exposed so external checkers
/// can replay the exact traversal.
pub fn compositing_order(scene: &GaussianScene, camera: &Camera) -> Result<Vec<usize>> {
    Ok(
        prepare_splats(scene, camera, &RenderOptions::default())?
            .iter()
            .map(|p| p.idx as usize)
            .collect(),
    )
}

/// Forward plus gradients for the standard training path.
pub fn render_backward(
    scene: &GaussianScene,
    camera: &Camera,
    loss_grad: &[f64],
) -> Result<RenderOutput> {
    render(
        scene,
        camera,
        &RenderOptions {
            loss_grad: Some(loss_grad),
            ..RenderOptions::default()
        },
    )
}

// ---- shared projection internals ----

/// A visible splat after projection, in global compositing order. Shared
/// with the in-crate test oracles so they replay the exact same inputs.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub idx: u32,
    pub mu: [f64; 2],
    /// Inverse 2D covariance [a, b, c] of [[a, b], [b, c]].
    pub icov: [f64; 3],
    pub depth: f64,
    pub opacity: f64,
    /// Forward color: pre-clamp SH color clamped at zero.
    pub color: [f64; 3],
    /// Whether the pre-clamp color was positive, per channel.
    pub clamp_pass: [bool; 3],
    pub radius: f64,
    /// Per-channel dot of the degree-3 basis with the raw coefficients.
    pub deg3_dot: [f64; 3],
    pub mask_weight: f64,
    pub sig_prime: f64,
    pub basis: [f64; 16],
    pub key1: u64,
    pub key2: u64,
}

pub(crate) use composite::prepare as prepare_splats;

pub(crate) struct ProjectedCore {
    pub t: [f64; 3],
    pub mu: [f64; 2],
    /// [a, b, c] of the symmetric 2x2 covariance [[a, b], [b, c]].
    pub cov: [f64; 3],
    pub visible: bool,
}

pub(crate) fn quat_to_rot(q: [f64; 4]) -> [[f64; 3]; 3] {
    let [w, x, y, z] = q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

pub(crate) fn project_core(
    scene: &GaussianScene,
    camera: &Camera,
    i: usize,
) -> Result<ProjectedCore> {
    let p = scene.position(i);
    let t = camera.to_camera(p);
    if !(t[2] > NEAR_PLANE) {
        return Ok(ProjectedCore {
            t,
            mu: [0.0; 2],
            cov: [0.0; 3],
            visible: false,
        });
    }
    let q = scene.normalized_rotation(i)?;
    let rot = quat_to_rot(q);
    let ls = scene.log_scale(i);
    let s = [ls[0].exp(), ls[1].exp(), ls[2].exp()];
    // M = R * diag(s); world covariance = M M^T
    let mut m = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = rot[r][c] * s[c];
        }
    }
    let mut sigma = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            sigma[r][c] = (0..3).map(|k| m[r][k] * m[c][k]).sum();
        }
    }
    // V = W sigma W^T in camera space
    let w = &camera.rotation;
    let mut ws = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            ws[r][c] = (0..3).map(|k| w[r][k] * sigma[k][c]).sum();
        }
    }
    let mut v = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            v[r][c] = (0..3).map(|k| ws[r][k] * w[c][k]).sum();
        }
    }
    // Perspective Jacobian rows: [fx/tz, 0, -fx tx / tz^2], [0, fy/tz, -fy ty / tz^2]
    let tz = t[2];
    let j00 = camera.fx / tz;
    let j02 = -camera.fx * t[0] / (tz * tz);
    let j11 = camera.fy / tz;
    let j12 = -camera.fy * t[1] / (tz * tz);
    let r0 = [
        j00 * v[0][0] + j02 * v[2][0],
        j00 * v[0][1] + j02 * v[2][1],
        j00 * v[0][2] + j02 * v[2][2],
    ];
    let r1 = [
        j11 * v[1][0] + j12 * v[2][0],
        j11 * v[1][1] + j12 * v[2][1],
        j11 * v[1][2] + j12 * v[2][2],
    ];
    let cov = [
        j00 * r0[0] + j02 * r0[2] + COV2D_DILATION,
        j11 * r0[1] + j12 * r0[2],
        j11 * r1[1] + j12 * r1[2] + COV2D_DILATION,
    ];
    let mu = [
        camera.fx * t[0] / tz + camera.cx,
        camera.fy * t[1] / tz + camera.cy,
    ];
    Ok(ProjectedCore {
        t,
        mu,
        cov,
        visible: true,
    })
}

/// SH basis at the view direction from the camera center to the splat.
pub(crate) fn basis_for(scene: &GaussianScene, i: usize, cam_center: [f64; 3]) -> [f64; 16] {
    let p = scene.position(i);
    let d = [
        p[0] - cam_center[0],
        p[1] - cam_center[1],
        p[2] - cam_center[2],
    ];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let dir = if n > 1e-12 {
        [d[0] / n, d[1] / n, d[2] / n]
    } else {
        [0.0; 3]
    };
    sh::sh_basis(dir, scene.max_sh_degree)
}

/// Pre-clamp color (`SH + 0.5`) with the degree-3 band scaled by `weight`,
/// plus the per-channel degree-3 dot products needed for the mask gradient.
pub(crate) fn sh_color(
    scene: &GaussianScene,
    i: usize,
    basis: &[f64; 16],
    weight: f64,
) -> ([f64; 3], [f64; 3]) {
    let n_coeffs = sh::coeffs_for_degree(scene.max_sh_degree);
    let dc = scene.sh_dc_row(i);
    let rest = scene.sh_rest_row(i);
    let mut color = [0.0f64; 3];
    let mut deg3 = [0.0f64; 3];
    for ch in 0..3 {
        let mut acc = basis[0] * dc[ch];
        let mut acc3 = 0.0;
        for b in 1..n_coeffs {
            let coef = rest[ch * crate::scene::SH_REST_PER_CHANNEL + (b - 1)];
            if b >= sh::DEG3_START {
                acc3 += basis[b] * coef;
            } else {
                acc += basis[b] * coef;
            }
        }
        color[ch] = acc + weight * acc3 + 0.5;
        deg3[ch] = acc3;
    }
    (color, deg3)
}
