//! Dropping Gaussians and gating their degree-3 SH band.

use crate::error::{Error, Result};
use crate::render::sh::DEG3_START;
use crate::scene::{GaussianScene, SH_REST_PER_CHANNEL, SH_REST_WIDTH};
use crate::sigmoid;

/// Coefficients in the degree-3 band of one channel.
pub const DEG3_PER_CHANNEL: usize = 16 - DEG3_START;
/// Width of a channel-major degree-3 block (R band, G band, B band).
pub const DEG3_BLOCK: usize = 3 * DEG3_PER_CHANNEL;

/// Remove the Gaussians whose indices appear in `drop`; the survivors keep
/// their relative order. Duplicate indices are tolerated.
pub fn prune(scene: &GaussianScene, drop: &[usize]) -> Result<GaussianScene> {
    let n = scene.count();
    let mut dead = vec![false; n];
    for &i in drop {
        if i >= n {
            return Err(Error::IndexOutOfRange(format!("prune index {i} of {n}")));
        }
        dead[i] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !dead[i]).collect();
    reorder(scene, &keep)
}

/// Gather a new scene from `take[j]` -> row j of the output. Indices may
/// repeat or omit rows; this is the shared kernel for pruning and sorting.
pub fn reorder(scene: &GaussianScene, take: &[usize]) -> Result<GaussianScene> {
    let n = scene.count();
    let mut out = GaussianScene::empty(scene.max_sh_degree);
    out.positions.reserve(3 * take.len());
    for &i in take {
        if i >= n {
            return Err(Error::IndexOutOfRange(format!("reorder index {i} of {n}")));
        }
        out.positions.extend_from_slice(&scene.positions[3 * i..3 * i + 3]);
        out.rotation_params
            .extend_from_slice(&scene.rotation_params[4 * i..4 * i + 4]);
        out.log_scales
            .extend_from_slice(&scene.log_scales[3 * i..3 * i + 3]);
        out.opacity_logits.push(scene.opacity_logits[i]);
        out.sh_dc.extend_from_slice(&scene.sh_dc[3 * i..3 * i + 3]);
        out.sh_rest
            .extend_from_slice(&scene.sh_rest[SH_REST_WIDTH * i..SH_REST_WIDTH * (i + 1)]);
        out.mask_logits.push(scene.mask_logits[i]);
    }
    Ok(out)
}

/// Whether each Gaussian keeps its degree-3 band: `sigmoid(m) > threshold`
/// (strict).
pub fn mask_flags(scene: &GaussianScene, threshold: f64) -> Vec<bool> {
    scene
        .mask_logits
        .iter()
        .map(|&m| sigmoid(m) > threshold)
        .collect()
}

/// Effective degree-3 coefficients after masking, one channel-major
/// `[R x7, G x7, B x7]` block per Gaussian: the raw coefficients where the
/// mask is on, zeros where it is off.
pub fn masked_sh(scene: &GaussianScene, threshold: f64) -> Vec<f64> {
    let flags = mask_flags(scene, threshold);
    let mut out = vec![0.0f64; scene.count() * DEG3_BLOCK];
    for (i, &on) in flags.iter().enumerate() {
        if !on {
            continue;
        }
        let row = scene.sh_rest_row(i);
        let dst = &mut out[i * DEG3_BLOCK..(i + 1) * DEG3_BLOCK];
        for ch in 0..3 {
            for b in 0..DEG3_PER_CHANNEL {
                dst[ch * DEG3_PER_CHANNEL + b] =
                    row[ch * SH_REST_PER_CHANNEL + (DEG3_START - 1) + b];
            }
        }
    }
    out
}

/// Collapse soft masks into the scene: zero the degree-3 coefficients of
/// masked Gaussians and snap every mask logit to +/-8. Renders identically
/// to the input under the same threshold, and is idempotent.
pub fn bake_mask(scene: &GaussianScene, threshold: f64) -> GaussianScene {
    let mut out = scene.clone();
    for (i, &on) in mask_flags(scene, threshold).iter().enumerate() {
        out.mask_logits[i] = if on { 8.0 } else { -8.0 };
        if !on {
            let row = &mut out.sh_rest[SH_REST_WIDTH * i..SH_REST_WIDTH * (i + 1)];
            for ch in 0..3 {
                for b in 0..DEG3_PER_CHANNEL {
                    row[ch * SH_REST_PER_CHANNEL + (DEG3_START - 1) + b] = 0.0;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{render, RenderOptions};
    use crate::testkit;
    use crate::DEFAULT_MASK_THRESHOLD;

    #[test]
    fn prune_drops_and_keeps_order() {
        let s = testkit::random_scene(5, 3, 1);
        let p = prune(&s, &[1, 3, 3]).unwrap();
        assert_eq!(p.count(), 3);
        for (j, &src) in [0usize, 2, 4].iter().enumerate() {
            assert_eq!(p.position(j), s.position(src));
            assert_eq!(p.sh_rest_row(j), s.sh_rest_row(src));
        }
        assert!(prune(&s, &[5]).is_err());
        // empty drop set is identity
        assert_eq!(prune(&s, &[]).unwrap(), s);
    }

    #[test]
    fn prune_to_empty() {
        let s = testkit::random_scene(3, 2, 2);
        let p = prune(&s, &[0, 1, 2]).unwrap();
        assert_eq!(p.count(), 0);
        assert_eq!(p.max_sh_degree, 2);
    }

    #[test]
    fn masked_sh_zeroes_only_masked_rows() {
        let mut s = testkit::random_scene(4, 3, 3);
        s.mask_logits = vec![8.0, -8.0, 8.0, -8.0];
        let blocks = masked_sh(&s, DEFAULT_MASK_THRESHOLD);
        for i in [1usize, 3] {
            assert!(blocks[i * DEG3_BLOCK..(i + 1) * DEG3_BLOCK]
                .iter()
                .all(|&v| v == 0.0));
        }
        for i in [0usize, 2] {
            let row = s.sh_rest_row(i);
            let blk = &blocks[i * DEG3_BLOCK..(i + 1) * DEG3_BLOCK];
            assert_eq!(blk[0], row[DEG3_START - 1]); // first R deg-3 coeff
            assert_eq!(
                blk[DEG3_PER_CHANNEL],
                row[SH_REST_PER_CHANNEL + DEG3_START - 1]
            ); // first G deg-3 coeff
            assert!(blk.iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn threshold_is_strict() {
        let mut s = testkit::random_scene(1, 3, 4);
        // sigmoid(m) == threshold exactly -> masked (strict >)
        s.mask_logits[0] = crate::logit(DEFAULT_MASK_THRESHOLD);
        assert_eq!(mask_flags(&s, DEFAULT_MASK_THRESHOLD), vec![false]);
    }

    #[test]
    fn bake_is_idempotent_and_render_preserving() {
        let (mut scene, camera) = testkit::gradcheck_setup(6, 11);
        scene.mask_logits = vec![3.0, -3.0, 0.5, -0.5, 6.0, -6.0];
        let baked = bake_mask(&scene, DEFAULT_MASK_THRESHOLD);
        assert_eq!(bake_mask(&baked, DEFAULT_MASK_THRESHOLD), baked);
        let a = render(&scene, &camera, &RenderOptions::default()).unwrap();
        let b = render(&baked, &camera, &RenderOptions::default()).unwrap();
        assert_eq!(a.color.data, b.color.data);
        for (i, &m) in baked.mask_logits.iter().enumerate() {
            assert!(m == 8.0 || m == -8.0, "logit {m} at {i}");
        }
    }
}
