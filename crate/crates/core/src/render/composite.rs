//! Tiled forward/backward compositing.
//!
//! Tiles are a parallelization structure only: the per-pixel contribution
//! rule is exactly "skip contributions with alpha < 1/255", and the tile
//! culling radius (3.5 sigma) is wide enough that every skipped splat would
//! have failed that alpha test anyway. Per-Gaussian accumulators are merged
//! in fixed tile order, so results are bit-identical for any thread count.

use super::{
    basis_for, project_core, sh, sh_color, GradBuffers, MaskMode, Prepared, RenderOptions,
    RenderOutput, ALPHA_MAX, ALPHA_MIN, TILE_SIZE, TRANSMITTANCE_MIN,
};
use crate::error::{Error, Result};
use crate::scene::{Camera, GaussianScene, ImageRgb, SH_REST_PER_CHANNEL, SH_REST_WIDTH};
use crate::sigmoid;
use rayon::prelude::*;

/// Per-splat culling radius in units of the largest 2D standard deviation.
/// exp(-3.5^2 / 2) * max opacity < 1/255, so culling at this radius never
/// removes a contribution the alpha test would have kept.
const CULL_SIGMA: f64 = 3.5;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(seed: u64, values: &[f64]) -> u64 {
    let mut h = seed;
    for v in values {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

pub(crate) fn prepare(
    scene: &GaussianScene,
    camera: &Camera,
    opts: &RenderOptions,
) -> Result<Vec<Prepared>> {
    let center = camera.center();
    let width = camera.width as f64;
    let height = camera.height as f64;
    let mut prepared = Vec::new();
    for i in 0..scene.count() {
        let core = project_core(scene, camera, i)?;
        if !core.visible {
            continue;
        }
        let [a, b, c] = core.cov;
        let det = a * c - b * b;
        if !(det > 0.0 && det.is_finite() && a.is_finite() && c.is_finite()) {
            return Err(Error::DegenerateSplat(format!(
                "gaussian {i}: projected covariance [{a}, {b}; {b}, {c}] is not positive definite"
            )));
        }
        let icov = [c / det, -b / det, a / det];
        let lam_max = 0.5 * ((a + c) + ((a - c) * (a - c) + 4.0 * b * b).sqrt());
        let radius = CULL_SIGMA * lam_max.sqrt();
        // Entirely off-screen (pixel centers live on [0, w-1] x [0, h-1])?
        if core.mu[0] + radius < 0.0
            || core.mu[0] - radius > width - 1.0
            || core.mu[1] + radius < 0.0
            || core.mu[1] - radius > height - 1.0
        {
            continue;
        }
        let m = scene.mask_logits[i];
        let mask_weight = match opts.mask_mode {
            MaskMode::Hard => {
                if sigmoid(m) > opts.mask_threshold {
                    1.0
                } else {
                    0.0
                }
            }
            MaskMode::SoftSte(offsets) => sigmoid(m) + offsets[i],
            MaskMode::Off => 1.0,
        };
        let basis = basis_for(scene, i, center);
        let (pre, deg3_dot) = sh_color(scene, i, &basis, mask_weight);
        let color = [pre[0].max(0.0), pre[1].max(0.0), pre[2].max(0.0)];
        let clamp_pass = [pre[0] > 0.0, pre[1] > 0.0, pre[2] > 0.0];
        let sig = sigmoid(m);
        prepared.push(Prepared {
            idx: i as u32,
            mu: core.mu,
            icov,
            depth: core.t[2],
            opacity: sigmoid(scene.opacity_logits[i]),
            color,
            clamp_pass,
            radius,
            deg3_dot,
            mask_weight,
            sig_prime: sig * (1.0 - sig),
            basis,
            key1: fnv1a(FNV_OFFSET, &scene.positions[3 * i..3 * i + 3]),
            key2: {
                let mut h = fnv1a(FNV_OFFSET, &scene.rotation_params[4 * i..4 * i + 4]);
                h = fnv1a(h, &scene.log_scales[3 * i..3 * i + 3]);
                h = fnv1a(h, &[scene.opacity_logits[i]]);
                h = fnv1a(h, &scene.sh_dc[3 * i..3 * i + 3]);
                h = fnv1a(h, scene.sh_rest_row(i));
                fnv1a(h, &[scene.mask_logits[i]])
            },
        });
    }
    // Global front-to-back order: depth ascending, ties broken by content
    // hash so the order never depends on array position. The sort is stable,
    // which keeps fully identical splats permutation-equivariant too.
    prepared.sort_by(|p, q| {
        p.depth
            .total_cmp(&q.depth)
            .then(p.key1.cmp(&q.key1))
            .then(p.key2.cmp(&q.key2))
    });
    Ok(prepared)
}

/// Per-slot accumulators gathered tile-locally and merged in tile order.
#[derive(Debug, Clone, Copy, Default)]
struct SlotAccum {
    /// Sum of alpha * T (blend weight).
    blend: f64,
    /// Per-channel sum of clamped loss grad * alpha * T.
    w: [f64; 3],
    /// Sum of dL/dalpha * g where the alpha ceiling is inactive.
    dalpha_g: f64,
    /// Sum over pixels/channels of (d output / d g)^2.
    g2: f64,
}

struct TileResult {
    color: Vec<f64>,
    depth: Vec<f64>,
    trans: Vec<f64>,
    slots: Option<Vec<SlotAccum>>,
}

pub(super) fn run(
    scene: &GaussianScene,
    camera: &Camera,
    opts: &RenderOptions,
) -> Result<RenderOutput> {
    let w = camera.width as usize;
    let h = camera.height as usize;
    let prepared = prepare(scene, camera, opts)?;

    let tiles_x = w.div_ceil(TILE_SIZE);
    let tiles_y = h.div_ceil(TILE_SIZE);
    let n_tiles = tiles_x * tiles_y;
    let mut tile_lists: Vec<Vec<u32>> = vec![Vec::new(); n_tiles];
    for (slot, p) in prepared.iter().enumerate() {
        let tx0 = (((p.mu[0] - p.radius) / TILE_SIZE as f64).floor() as i64).max(0);
        let tx1 = (((p.mu[0] + p.radius) / TILE_SIZE as f64).floor() as i64)
            .min(tiles_x as i64 - 1);
        let ty0 = (((p.mu[1] - p.radius) / TILE_SIZE as f64).floor() as i64).max(0);
        let ty1 = (((p.mu[1] + p.radius) / TILE_SIZE as f64).floor() as i64)
            .min(tiles_y as i64 - 1);
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                tile_lists[ty as usize * tiles_x + tx as usize].push(slot as u32);
            }
        }
    }

    let want_slots = opts.want_blend_weights || opts.loss_grad.is_some();
    let results: Vec<TileResult> = (0..n_tiles)
        .into_par_iter()
        .map(|t| {
            process_tile(
                t % tiles_x,
                t / tiles_x,
                w,
                h,
                &prepared,
                &tile_lists[t],
                opts.loss_grad,
                want_slots,
            )
        })
        .collect();

    // Serial merge in tile order.
    let mut color = ImageRgb::zeros(w, h);
    let mut depth = vec![0.0f64; w * h];
    let mut trans = vec![0.0f64; w * h];
    let mut slot_accum = vec![SlotAccum::default(); if want_slots { prepared.len() } else { 0 }];
    for (t, res) in results.iter().enumerate() {
        let (tx, ty) = (t % tiles_x, t / tiles_x);
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        let tw = (w - x0).min(TILE_SIZE);
        let th = (h - y0).min(TILE_SIZE);
        for dy in 0..th {
            for dx in 0..tw {
                let src = dy * tw + dx;
                let dst = (y0 + dy) * w + (x0 + dx);
                color.data[3 * dst..3 * dst + 3]
                    .copy_from_slice(&res.color[3 * src..3 * src + 3]);
                depth[dst] = res.depth[src];
                trans[dst] = res.trans[src];
            }
        }
        if let Some(local) = &res.slots {
            for (k, &slot) in tile_lists[t].iter().enumerate() {
                let acc = &mut slot_accum[slot as usize];
                let l = &local[k];
                acc.blend += l.blend;
                for ch in 0..3 {
                    acc.w[ch] += l.w[ch];
                }
                acc.dalpha_g += l.dalpha_g;
                acc.g2 += l.g2;
            }
        }
    }

    let blend_weights = if opts.want_blend_weights {
        let mut bw = vec![0.0f64; scene.count()];
        for (slot, p) in prepared.iter().enumerate() {
            bw[p.idx as usize] = slot_accum[slot].blend;
        }
        Some(bw)
    } else {
        None
    };

    let grad = if opts.loss_grad.is_some() {
        let mut g = GradBuffers::zeros(scene.count());
        let n_coeffs = sh::coeffs_for_degree(scene.max_sh_degree);
        for (slot, p) in prepared.iter().enumerate() {
            let acc = &slot_accum[slot];
            let i = p.idx as usize;
            let o = p.opacity;
            g.d_opacity_logit[i] = acc.dalpha_g * o * (1.0 - o);
            g.g_grad_sq[i] = acc.g2;
            let mut mask_dot = 0.0;
            for ch in 0..3 {
                let dpre = if p.clamp_pass[ch] { acc.w[ch] } else { 0.0 };
                g.d_sh_dc[3 * i + ch] = dpre * p.basis[0];
                for b in 1..n_coeffs {
                    let weight = if b >= sh::DEG3_START { p.mask_weight } else { 1.0 };
                    g.d_sh_rest[SH_REST_WIDTH * i + ch * SH_REST_PER_CHANNEL + (b - 1)] =
                        dpre * p.basis[b] * weight;
                }
                mask_dot += dpre * p.deg3_dot[ch];
            }
            g.d_mask_logit[i] = p.sig_prime * mask_dot;
        }
        Some(g)
    } else {
        None
    };

    Ok(RenderOutput {
        color,
        depth: if opts.want_depth { depth } else { Vec::new() },
        transmittance: trans,
        grad,
        blend_weights,
    })
}

#[allow(clippy::too_many_arguments)]
fn process_tile(
    tx: usize,
    ty: usize,
    w: usize,
    h: usize,
    prepared: &[Prepared],
    list: &[u32],
    loss_grad: Option<&[f64]>,
    want_slots: bool,
) -> TileResult {
    let x0 = tx * TILE_SIZE;
    let y0 = ty * TILE_SIZE;
    let tw = (w - x0).min(TILE_SIZE);
    let th = (h - y0).min(TILE_SIZE);
    let mut color = vec![0.0f64; tw * th * 3];
    let mut depth = vec![0.0f64; tw * th];
    let mut trans = vec![1.0f64; tw * th];
    let mut slots = if want_slots {
        Some(vec![SlotAccum::default(); list.len()])
    } else {
        None
    };
    // (local list index, g, alpha, T before this splat), per pixel
    let mut chain: Vec<(u32, f64, f64, f64)> = Vec::with_capacity(list.len());

    for dy in 0..th {
        for dx in 0..tw {
            let px = (x0 + dx) as f64;
            let py = (y0 + dy) as f64;
            let mut t = 1.0f64;
            let mut c_acc = [0.0f64; 3];
            let mut d_acc = 0.0f64;
            chain.clear();
            for (k, &slot) in list.iter().enumerate() {
                if t < TRANSMITTANCE_MIN {
                    break;
                }
                let p = &prepared[slot as usize];
                let ddx = px - p.mu[0];
                let ddy = py - p.mu[1];
                if ddx * ddx + ddy * ddy > p.radius * p.radius {
                    continue; // implied alpha < 1/255 by the radius bound
                }
                let q = -0.5 * (p.icov[0] * ddx * ddx + p.icov[2] * ddy * ddy)
                    - p.icov[1] * ddx * ddy;
                let g = q.exp();
                let alpha = (p.opacity * g).min(ALPHA_MAX);
                if alpha < ALPHA_MIN {
                    continue;
                }
                for ch in 0..3 {
                    c_acc[ch] += p.color[ch] * alpha * t;
                }
                d_acc += p.depth * alpha * t;
                if let Some(s) = &mut slots {
                    s[k].blend += alpha * t;
                }
                if loss_grad.is_some() {
                    chain.push((k as u32, g, alpha, t));
                }
                t *= 1.0 - alpha;
            }

            let o = dy * tw + dx;
            for ch in 0..3 {
                color[3 * o + ch] = c_acc[ch].clamp(0.0, 1.0);
            }
            depth[o] = d_acc;
            trans[o] = t;

            if let (Some(lg), Some(s)) = (loss_grad, &mut slots) {
                let pix = (y0 + dy) * w + (x0 + dx);
                // The output clamp: gradient passes only where the
                // composited value did not exceed 1.
                let mut lgp = [0.0f64; 3];
                let mut clampf = [0.0f64; 3];
                for ch in 0..3 {
                    clampf[ch] = if c_acc[ch] <= 1.0 { 1.0 } else { 0.0 };
                    lgp[ch] = lg[3 * pix + ch] * clampf[ch];
                }
                let mut suffix = [0.0f64; 3];
                for &(k, g, alpha, t_i) in chain.iter().rev() {
                    let p = &prepared[list[k as usize] as usize];
                    let one_m = 1.0 - alpha;
                    let mut dl_dalpha = 0.0f64;
                    let mut g2 = 0.0f64;
                    let ceiling_off = p.opacity * g < ALPHA_MAX;
                    for ch in 0..3 {
                        let dc_dalpha = p.color[ch] * t_i - suffix[ch] / one_m;
                        dl_dalpha += lgp[ch] * dc_dalpha;
                        if ceiling_off {
                            let dout_dg = clampf[ch] * dc_dalpha * p.opacity;
                            g2 += dout_dg * dout_dg;
                        }
                        s[k as usize].w[ch] += lgp[ch] * alpha * t_i;
                        suffix[ch] += p.color[ch] * alpha * t_i;
                    }
                    if ceiling_off {
                        s[k as usize].dalpha_g += dl_dalpha * g;
                        s[k as usize].g2 += g2;
                    }
                }
            }
        }
    }

    TileResult {
        color,
        depth,
        trans,
        slots,
    }
}
