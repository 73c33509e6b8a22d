//! Spatial ordering along a Morton (Z-order) curve.
//!
//! Positions are quantized to a 21-bit lattice per axis over the scene's
//! bounding box and the three coordinates are bit-interleaved into a
//! single 63-bit key. Sorting by that key places spatially adjacent
//! Gaussians next to each other in memory, which makes the downstream
//! quantized attribute streams far more compressible: neighbours tend to
//! share scale, colour, and opacity statistics.

use crate::error::{Error, Result};
use crate::prune::reorder;
use crate::scene::GaussianScene;

/// Bits of precision per axis. 3 * 21 = 63 bits fits a u64 key.
pub const MORTON_BITS: u32 = 21;

/// Spread the low 21 bits of `v` so bit `k` lands at bit `3k`.
fn spread(v: u64) -> u64 {
    let mut x = v & 0x1f_ffff;
    x = (x | (x << 32)) & 0x1f00000000ffff;
    x = (x | (x << 16)) & 0x1f0000ff0000ff;
    x = (x | (x << 8)) & 0x100f00f00f00f00f;
    x = (x | (x << 4)) & 0x10c30c30c30c30c3;
    x = (x | (x << 2)) & 0x1249249249249249;
    x
}

/// Interleave three 21-bit coordinates: x occupies bits 3k, y bits
/// 3k + 1, z bits 3k + 2.
pub fn interleave3(x: u64, y: u64, z: u64) -> u64 {
    spread(x) | (spread(y) << 1) | (spread(z) << 2)
}

/// Quantize one coordinate to the 21-bit lattice spanning [min, max].
/// A degenerate axis (min == max) maps everything to cell zero.
fn lattice(v: f64, min: f64, max: f64) -> u64 {
    if max <= min {
        return 0;
    }
    let steps = ((1u64 << MORTON_BITS) - 1) as f64;
    let t = ((v - min) / (max - min) * steps).round();
    (t.clamp(0.0, steps)) as u64
}

/// Morton key of one position given the bounding box `(lo, hi)`.
pub fn morton_key(p: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> u64 {
    let x = lattice(p[0], lo[0], hi[0]);
    let y = lattice(p[1], lo[1], hi[1]);
    let z = lattice(p[2], lo[2], hi[2]);
    interleave3(x, y, z)
}

/// Sort a scene along the Morton curve of its own bounding box.
///
/// Returns the reordered scene together with the permutation applied:
/// `perm[new_index] = old_index`. The sort is stable, so Gaussians in
/// the same lattice cell keep their original relative order and the
/// result is a pure reordering — every attribute travels with its
/// Gaussian, and rendering is unaffected.
pub fn morton_sort(scene: &GaussianScene) -> Result<(GaussianScene, Vec<usize>)> {
    let n = scene.count();
    for (i, p) in scene.positions.chunks_exact(3).enumerate() {
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidScene(format!(
                "non-finite position on Gaussian {i}"
            )));
        }
    }
    let (lo, hi) = scene.aabb();
    let mut perm: Vec<usize> = (0..n).collect();
    let keys: Vec<u64> = (0..n)
        .map(|i| {
            let p = [
                scene.positions[3 * i],
                scene.positions[3 * i + 1],
                scene.positions[3 * i + 2],
            ];
            morton_key(p, lo, hi)
        })
        .collect();
    perm.sort_by_key(|&i| keys[i]);
    let sorted = reorder(scene, &perm)?;
    Ok((sorted, perm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::testkit;

    #[test]
    fn interleave_places_axes_in_expected_bits() {
        // x = 1 -> bit 0, y = 2 -> bit 3*1+1 = 4, z = 4 -> bit 3*2+2 = 8.
        assert_eq!(interleave3(1, 2, 4), 0b1_0001_0001);
        assert_eq!(interleave3(1, 2, 4), 273);
        assert_eq!(interleave3(0, 0, 0), 0);
        // All-ones in each axis fills all 63 bits.
        let full = (1u64 << 21) - 1;
        assert_eq!(interleave3(full, full, full), (1u64 << 63) - 1);
    }

    #[test]
    fn interleave_is_injective_on_random_coords() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..2000 {
            let x = rng.next_u64() & 0x1f_ffff;
            let y = rng.next_u64() & 0x1f_ffff;
            let z = rng.next_u64() & 0x1f_ffff;
            let key = interleave3(x, y, z);
            // Recover each axis by de-interleaving and check the triple
            // survives the roundtrip.
            let mut rx = 0u64;
            let mut ry = 0u64;
            let mut rz = 0u64;
            for k in 0..21 {
                rx |= ((key >> (3 * k)) & 1) << k;
                ry |= ((key >> (3 * k + 1)) & 1) << k;
                rz |= ((key >> (3 * k + 2)) & 1) << k;
            }
            assert_eq!((rx, ry, rz), (x, y, z));
        }
    }

    #[test]
    fn sort_orders_by_key_and_permutes_attributes_together() {
        let scene = testkit::random_scene(64, 3, 99);
        let (sorted, perm) = morton_sort(&scene).unwrap();
        assert_eq!(sorted.count(), scene.count());

        // Permutation is a bijection.
        let mut seen = vec![false; scene.count()];
        for &p in &perm {
            assert!(!seen[p]);
            seen[p] = true;
        }

        // Keys are non-decreasing in the new order.
        let (lo, hi) = scene.aabb();
        let key_of = |s: &GaussianScene, i: usize| {
            morton_key(
                [s.positions[3 * i], s.positions[3 * i + 1], s.positions[3 * i + 2]],
                lo,
                hi,
            )
        };
        for i in 1..sorted.count() {
            assert!(key_of(&sorted, i - 1) <= key_of(&sorted, i));
        }

        // Every attribute travelled with its Gaussian.
        for (new_i, &old_i) in perm.iter().enumerate() {
            assert_eq!(
                sorted.opacity_logits[new_i],
                scene.opacity_logits[old_i]
            );
            for c in 0..3 {
                assert_eq!(
                    sorted.positions[3 * new_i + c],
                    scene.positions[3 * old_i + c]
                );
            }
            for c in 0..45 {
                assert_eq!(
                    sorted.sh_rest[45 * new_i + c],
                    scene.sh_rest[45 * old_i + c]
                );
            }
        }
    }

    #[test]
    fn sort_is_stable_within_a_cell() {
        // Two Gaussians at the same position land in the same lattice
        // cell; stability keeps their original order.
        let mut scene = testkit::random_scene(4, 0, 5);
        for i in 0..4 {
            scene.positions[3 * i] = if i < 2 { 0.0 } else { 1.0 };
            scene.positions[3 * i + 1] = 0.0;
            scene.positions[3 * i + 2] = 0.0;
        }
        let (_, perm) = morton_sort(&scene).unwrap();
        let pos0 = perm.iter().position(|&p| p == 0).unwrap();
        let pos1 = perm.iter().position(|&p| p == 1).unwrap();
        assert!(pos0 < pos1);
    }

    #[test]
    fn degenerate_axis_is_tolerated() {
        let mut scene = testkit::random_scene(8, 0, 7);
        for i in 0..8 {
            scene.positions[3 * i + 2] = 4.0; // planar scene, z constant
        }
        let (sorted, _) = morton_sort(&scene).unwrap();
        assert_eq!(sorted.count(), 8);
    }

    #[test]
    fn non_finite_position_is_rejected() {
        let mut scene = testkit::random_scene(3, 0, 2);
        scene.positions[4] = f64::NAN;
        assert!(morton_sort(&scene).is_err());
    }
}
