//! Reference oracles and fixture generators shared by the test suites.
//!
//! Everything here recomputes results by a route independent of the
//! implementation it checks: compositing by a standalone per-pixel loop over
//! public projection data, gradients by central finite differences, chamfer
//! by exhaustive search, SSIM by direct windowed convolution. Production
//! code must never call into this module.

use crate::render::{
    self, MaskMode, RenderOptions, SplatProjection, ALPHA_MAX, ALPHA_MIN, TRANSMITTANCE_MIN,
};
use crate::rng::SplitMix64;
use crate::scene::{Camera, GaussianScene, ImageRgb, SH_REST_WIDTH};
use crate::{logit, sigmoid, DEFAULT_MASK_THRESHOLD};

pub use crate::io::generate_synthetic;

/// Evenly spaced cameras on a ring around `center`.
pub fn ring_cameras(n: usize, center: [f64; 3], radius: f64, width: u32, height: u32) -> Vec<Camera> {
    crate::io::camera_ring(n, center, radius, width, height)
}

/// Generic random scene for roundtrip/property tests.
pub fn random_scene(n: usize, max_sh_degree: u8, seed: u64) -> GaussianScene {
    let mut rng = SplitMix64::new(seed.wrapping_mul(0x9E37).wrapping_add(1));
    let mut s = GaussianScene::empty(max_sh_degree);
    for _ in 0..n {
        for _ in 0..3 {
            s.positions.push(rng.uniform(-1.0, 1.0));
        }
    }
    for _ in 0..n {
        for _ in 0..4 {
            s.rotation_params.push(rng.uniform(-1.0, 1.0));
        }
    }
    for _ in 0..n {
        for _ in 0..3 {
            s.log_scales.push(rng.uniform(0.02f64.ln(), 0.12f64.ln()));
        }
    }
    for _ in 0..n {
        s.opacity_logits.push(logit(rng.uniform(0.05, 0.98)));
    }
    for _ in 0..n {
        for _ in 0..3 {
            s.sh_dc.push(rng.uniform(-0.5, 1.0));
        }
    }
    for _ in 0..n {
        for _ in 0..SH_REST_WIDTH {
            s.sh_rest.push(rng.uniform(-0.3, 0.3));
        }
    }
    s.mask_logits = (0..n).map(|_| rng.uniform(-6.0, 9.0)).collect();
    s
}

/// A 32x32 camera plus a scene arranged inside its frustum, tuned so the
/// forward pass stays away from its non-differentiable boundaries (alpha
/// ceiling, deep-occlusion cutoff): the setting for finite-difference
/// gradient checks.
pub fn gradcheck_setup(n: usize, seed: u64) -> (GaussianScene, Camera) {
    let mut rng = SplitMix64::new(seed.wrapping_mul(77).wrapping_add(13));
    let camera = Camera {
        name: "fd".into(),
        width: 32,
        height: 32,
        fx: 24.0,
        fy: 24.0,
        cx: 15.5,
        cy: 15.5,
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: [0.0, 0.0, 0.0],
    };
    let mut s = GaussianScene::empty(3);
    for _ in 0..n {
        let z = rng.uniform(2.5, 4.0);
        // keep the splat center well inside the image
        let lim = 0.55 * z / 24.0 * 15.5;
        s.positions.push(rng.uniform(-lim, lim));
        s.positions.push(rng.uniform(-lim, lim));
        s.positions.push(z);
    }
    for _ in 0..n {
        for _ in 0..4 {
            s.rotation_params.push(rng.uniform(-1.0, 1.0));
        }
    }
    for _ in 0..n {
        for _ in 0..3 {
            s.log_scales.push(rng.uniform(0.08f64.ln(), 0.3f64.ln()));
        }
    }
    for _ in 0..n {
        // opacities in (0.18, 0.82): alpha never reaches the 0.99 ceiling
        s.opacity_logits.push(rng.uniform(-1.5, 1.5));
    }
    for _ in 0..n {
        for _ in 0..3 {
            s.sh_dc.push(rng.uniform(0.0, 0.4));
        }
    }
    for _ in 0..n {
        for _ in 0..SH_REST_WIDTH {
            s.sh_rest.push(rng.uniform(-0.04, 0.04));
        }
    }
    s.mask_logits = (0..n).map(|_| rng.uniform(-6.0, 6.0)).collect();
    (s, camera)
}

/// Relative error with an absolute floor: `|a-b| / max(|a|, |b|)` unless
/// both are below `floor`, in which case 0.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    let diff = (a - b).abs();
    if diff <= floor {
        return 0.0;
    }
    diff / a.abs().max(b.abs())
}

// ---------------------------------------------------------------------------
// Independent compositing oracle
// ---------------------------------------------------------------------------

/// Everything the oracle needs about one visible splat, built from the
/// public projection API.
#[derive(Debug, Clone)]
pub struct OracleSplat {
    pub index: usize,
    pub proj: SplatProjection,
    pub radius: f64,
}

/// Visible splats in the renderer's compositing order, with their public
/// projections.
pub fn oracle_splats(scene: &GaussianScene, camera: &Camera) -> Vec<OracleSplat> {
    render::compositing_order(scene, camera)
        .unwrap()
        .into_iter()
        .map(|i| {
            let proj = render::project(scene, camera, i).unwrap();
            let a = proj.cov2d[0][0];
            let b = proj.cov2d[0][1];
            let c = proj.cov2d[1][1];
            let lam_max = 0.5 * ((a + c) + ((a - c) * (a - c) + 4.0 * b * b).sqrt());
            OracleSplat {
                index: i,
                proj,
                radius: 3.5 * lam_max.sqrt(),
            }
        })
        .collect()
}

/// Composite one pixel front to back, optionally overriding the density `g`
/// of the splat at list position `k`. Returns the clamped color.
pub fn oracle_pixel(
    splats: &[OracleSplat],
    px: [f64; 2],
    g_override: Option<(usize, f64)>,
) -> [f64; 3] {
    let mut t = 1.0f64;
    let mut c = [0.0f64; 3];
    for (k, s) in splats.iter().enumerate() {
        if t < TRANSMITTANCE_MIN {
            break;
        }
        let dx = px[0] - s.proj.mu2d[0];
        let dy = px[1] - s.proj.mu2d[1];
        if dx * dx + dy * dy > s.radius * s.radius {
            continue;
        }
        let g = match g_override {
            Some((ko, go)) if ko == k => go,
            _ => render::splat_value(&s.proj, px).unwrap(),
        };
        let alpha = (s.proj.opacity * g).min(ALPHA_MAX);
        if alpha < ALPHA_MIN {
            continue;
        }
        for ch in 0..3 {
            c[ch] += s.proj.color[ch].max(0.0) * alpha * t;
        }
        t *= 1.0 - alpha;
    }
    [
        c[0].clamp(0.0, 1.0),
        c[1].clamp(0.0, 1.0),
        c[2].clamp(0.0, 1.0),
    ]
}

/// Full-image forward via the oracle path.
pub fn oracle_render(scene: &GaussianScene, camera: &Camera) -> ImageRgb {
    let splats = oracle_splats(scene, camera);
    let mut img = ImageRgb::zeros(camera.width as usize, camera.height as usize);
    for y in 0..camera.height as usize {
        for x in 0..camera.width as usize {
            let c = oracle_pixel(&splats, [x as f64, y as f64], None);
            img.set_pixel(x, y, c);
        }
    }
    img
}

/// Central finite differences of the per-Gaussian squared image Jacobian
/// with respect to each splat's density, summed over pixels and channels.
pub fn oracle_g_grad_sq(scene: &GaussianScene, camera: &Camera, step: f64) -> Vec<f64> {
    let splats = oracle_splats(scene, camera);
    let mut out = vec![0.0f64; scene.count()];
    for y in 0..camera.height as usize {
        for x in 0..camera.width as usize {
            let px = [x as f64, y as f64];
            for (k, s) in splats.iter().enumerate() {
                let g0 = render::splat_value(&s.proj, px).unwrap();
                let cp = oracle_pixel(&splats, px, Some((k, g0 + step)));
                let cm = oracle_pixel(&splats, px, Some((k, g0 - step)));
                for ch in 0..3 {
                    let d = (cp[ch] - cm[ch]) / (2.0 * step);
                    out[s.index] += d * d;
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Finite-difference loss gradients
// ---------------------------------------------------------------------------

/// Which scalar parameter to nudge (flat index into the scene array).
#[derive(Debug, Clone, Copy)]
pub enum ParamRef {
    ShDc(usize),
    ShRest(usize),
    OpacityLogit(usize),
    MaskLogit(usize),
}

fn param_slot<'a>(scene: &'a mut GaussianScene, p: ParamRef) -> &'a mut f64 {
    match p {
        ParamRef::ShDc(k) => &mut scene.sh_dc[k],
        ParamRef::ShRest(k) => &mut scene.sh_rest[k],
        ParamRef::OpacityLogit(k) => &mut scene.opacity_logits[k],
        ParamRef::MaskLogit(k) => &mut scene.mask_logits[k],
    }
}

/// Weighted sum of an image against a weight buffer of the same layout —
/// the scalar loss whose image gradient is exactly `weights`.
pub fn weighted_sum(img: &ImageRgb, weights: &[f64]) -> f64 {
    img.data.iter().zip(weights).map(|(a, b)| a * b).sum()
}

/// Straight-through mask offsets frozen at the current logits: adding them
/// to `sigmoid(m)` reproduces the hard forward at the unperturbed point
/// while staying differentiable in `m`.
pub fn ste_offsets(scene: &GaussianScene, threshold: f64) -> Vec<f64> {
    scene
        .mask_logits
        .iter()
        .map(|&m| {
            let s = sigmoid(m);
            let hard = if s > threshold { 1.0 } else { 0.0 };
            hard - s
        })
        .collect()
}

/// Central finite difference of `sum(weights * render(scene))` in the given
/// parameter. Mask logits are differenced through the frozen-offset soft
/// forward; everything else uses the production hard forward.
pub fn fd_loss_gradient(
    scene: &GaussianScene,
    camera: &Camera,
    weights: &[f64],
    param: ParamRef,
    step: f64,
) -> f64 {
    let offsets = ste_offsets(scene, DEFAULT_MASK_THRESHOLD);
    let eval = |s: &GaussianScene| -> f64 {
        let mode = match param {
            ParamRef::MaskLogit(_) => MaskMode::SoftSte(&offsets),
            _ => MaskMode::Hard,
        };
        let out = render::render(
            s,
            camera,
            &RenderOptions {
                want_depth: false,
                mask_mode: mode,
                ..RenderOptions::default()
            },
        )
        .unwrap();
        weighted_sum(&out.color, weights)
    };
    let mut plus = scene.clone();
    *param_slot(&mut plus, param) += step;
    let mut minus = scene.clone();
    *param_slot(&mut minus, param) -= step;
    (eval(&plus) - eval(&minus)) / (2.0 * step)
}

// ---------------------------------------------------------------------------
// Metric oracles
// ---------------------------------------------------------------------------

/// Exhaustive O(M*K) chamfer distance over flat xyz arrays.
pub fn brute_chamfer(a: &[f64], b: &[f64]) -> f64 {
    assert!(a.len() % 3 == 0 && b.len() % 3 == 0);
    assert!(!a.is_empty() && !b.is_empty());
    let one_way = |from: &[f64], to: &[f64]| -> f64 {
        let n = from.len() / 3;
        let mut total = 0.0;
        for i in 0..n {
            let p = &from[3 * i..3 * i + 3];
            let mut best = f64::INFINITY;
            for j in 0..to.len() / 3 {
                let q = &to[3 * j..3 * j + 3];
                let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                best = best.min(d2);
            }
            total += best.sqrt();
        }
        total / n as f64
    };
    0.5 * (one_way(a, b) + one_way(b, a))
}

/// SSIM by direct 11x11 windowed convolution per pixel (no separability),
/// symmetric-reflect padding, averaged over pixels then channels.
pub fn ssim_direct(a: &ImageRgb, b: &ImageRgb) -> f64 {
    assert_eq!((a.width, a.height), (b.width, b.height));
    let (w, h) = (a.width, a.height);
    assert!(w >= 11 && h >= 11);
    let sigma = 1.5f64;
    let mut kern = [[0.0f64; 11]; 11];
    let mut ksum = 0.0;
    for (i, row) in kern.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let di = i as f64 - 5.0;
            let dj = j as f64 - 5.0;
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            ksum += *v;
        }
    }
    for row in kern.iter_mut() {
        for v in row.iter_mut() {
            *v /= ksum;
        }
    }
    let reflect = |i: isize, n: usize| -> usize {
        if i < 0 {
            (-i - 1) as usize
        } else if i as usize >= n {
            2 * n - 1 - i as usize
        } else {
            i as usize
        }
    };
    let c1 = 0.01f64 * 0.01;
    let c2 = 0.03f64 * 0.03;
    let mut per_channel = [0.0f64; 3];
    for (ch, out) in per_channel.iter_mut().enumerate() {
        let mut acc = 0.0;
        for y in 0..h as isize {
            for x in 0..w as isize {
                let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for di in -5..=5isize {
                    for dj in -5..=5isize {
                        let yy = reflect(y + di, h);
                        let xx = reflect(x + dj, w);
                        let kv = kern[(di + 5) as usize][(dj + 5) as usize];
                        let va = a.data[(yy * w + xx) * 3 + ch];
                        let vb = b.data[(yy * w + xx) * 3 + ch];
                        mx += kv * va;
                        my += kv * vb;
                        mxx += kv * va * va;
                        myy += kv * vb * vb;
                        mxy += kv * va * vb;
                    }
                }
                let sx = mxx - mx * mx;
                let sy = myy - my * my;
                let sxy = mxy - mx * my;
                let s = ((2.0 * mx * my + c1) * (2.0 * sxy + c2))
                    / ((mx * mx + my * my + c1) * (sx + sy + c2));
                acc += s;
            }
        }
        *out = acc / (w * h) as f64;
    }
    (per_channel[0] + per_channel[1] + per_channel[2]) / 3.0
}
