//! Photometric (PSNR, SSIM) and geometric (chamfer) quality metrics.

use crate::error::{Error, Result};
use crate::scene::ImageRgb;

/// Peak signal-to-noise ratio in dB over all `H*W*3` entries on the
/// [0, 1] scale: `10 * log10(1 / MSE)`. Identical images give +inf.
pub fn psnr(a: &ImageRgb, b: &ImageRgb) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(format!(
            "psnr inputs {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let n = a.data.len();
    let mse: f64 = a
        .data
        .iter()
        .zip(b.data.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Normalized 1D Gaussian tap weights for the SSIM window.
fn ssim_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - (SSIM_WINDOW / 2) as f64;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    if i < 0 {
        (-i - 1) as usize
    } else if i as usize >= n {
        2 * n - 1 - i as usize
    } else {
        i as usize
    }
}

/// Gaussian-blur a plane with the separable SSIM kernel and
/// symmetric-reflect boundary handling.
fn blur(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as isize;
    let mut horiz = vec![0.0f64; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut horiz[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * row[reflect(x as isize + t as isize - half, w)];
            }
            out[x] = acc;
        }
    }
    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * horiz[reflect(y as isize + t as isize - half, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Mean structural similarity: 11x11 Gaussian window (sigma 1.5),
/// C1 = 0.01^2, C2 = 0.03^2, symmetric-reflect padding, computed per
/// channel and averaged. Runs as two separable blur passes per moment
/// plane, which matches a direct windowed convolution to roundoff.
pub fn ssim(a: &ImageRgb, b: &ImageRgb) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(format!(
            "ssim inputs {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let (w, h) = (a.width, a.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall(format!(
            "{w}x{h} below the {SSIM_WINDOW}x{SSIM_WINDOW} ssim window"
        )));
    }
    let k = ssim_kernel();
    let mut channel_means = [0.0f64; 3];
    for (ch, out) in channel_means.iter_mut().enumerate() {
        let mut pa = vec![0.0f64; w * h];
        let mut pb = vec![0.0f64; w * h];
        let mut paa = vec![0.0f64; w * h];
        let mut pbb = vec![0.0f64; w * h];
        let mut pab = vec![0.0f64; w * h];
        for i in 0..w * h {
            let va = a.data[i * 3 + ch];
            let vb = b.data[i * 3 + ch];
            pa[i] = va;
            pb[i] = vb;
            paa[i] = va * va;
            pbb[i] = vb * vb;
            pab[i] = va * vb;
        }
        let ma = blur(&pa, w, h, &k);
        let mb = blur(&pb, w, h, &k);
        let maa = blur(&paa, w, h, &k);
        let mbb = blur(&pbb, w, h, &k);
        let mab = blur(&pab, w, h, &k);
        let mut acc = 0.0;
        for i in 0..w * h {
            let sa = maa[i] - ma[i] * ma[i];
            let sb = mbb[i] - mb[i] * mb[i];
            let sab = mab[i] - ma[i] * mb[i];
            acc += ((2.0 * ma[i] * mb[i] + SSIM_C1) * (2.0 * sab + SSIM_C2))
                / ((ma[i] * ma[i] + mb[i] * mb[i] + SSIM_C1) * (sa + sb + SSIM_C2));
        }
        *out = acc / (w * h) as f64;
    }
    Ok((channel_means[0] + channel_means[1] + channel_means[2]) / 3.0)
}

// ---- chamfer distance ----

/// One node of the nearest-neighbour tree, stored in a flat arena.
struct KdNode {
    point: [f64; 3],
    axis: usize,
    left: i32,
    right: i32,
}

/// A k-d tree over 3D points giving exact nearest neighbours.
struct KdTree {
    nodes: Vec<KdNode>,
}

const KD_NONE: i32 = -1;

impl KdTree {
    fn build(points: &[f64]) -> KdTree {
        let n = points.len() / 3;
        let mut idx: Vec<usize> = (0..n).collect();
        let mut tree = KdTree {
            nodes: Vec::with_capacity(n),
        };
        tree.build_rec(points, &mut idx);
        tree
    }

    /// Build a subtree over `idx`, returning its root. Splits on the
    /// axis of largest spread at the median point.
    fn build_rec(&mut self, points: &[f64], idx: &mut [usize]) -> i32 {
        if idx.is_empty() {
            return KD_NONE;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in idx.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(points[3 * i + a]);
                hi[a] = hi[a].max(points[3 * i + a]);
            }
        }
        let mut axis = 0;
        for a in 1..3 {
            if hi[a] - lo[a] > hi[axis] - lo[axis] {
                axis = a;
            }
        }
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&p, &q| {
            points[3 * p + axis].total_cmp(&points[3 * q + axis])
        });
        let pivot = idx[mid];
        let node = self.nodes.len() as i32;
        self.nodes.push(KdNode {
            point: [
                points[3 * pivot],
                points[3 * pivot + 1],
                points[3 * pivot + 2],
            ],
            axis,
            left: KD_NONE,
            right: KD_NONE,
        });
        // Split borrows so the recursive calls own disjoint halves.
        let (left_idx, rest) = idx.split_at_mut(mid);
        let right_idx = &mut rest[1..];
        let left = self.build_rec(points, left_idx);
        let right = self.build_rec(points, right_idx);
        self.nodes[node as usize].left = left;
        self.nodes[node as usize].right = right;
        node
    }

    /// Squared distance from `q` to its nearest stored point.
    fn nearest_sq(&self, q: [f64; 3]) -> f64 {
        let mut best = f64::INFINITY;
        if !self.nodes.is_empty() {
            self.search(0, q, &mut best);
        }
        best
    }

    fn search(&self, node: i32, q: [f64; 3], best: &mut f64) {
        let n = &self.nodes[node as usize];
        let d2 = (q[0] - n.point[0]).powi(2)
            + (q[1] - n.point[1]).powi(2)
            + (q[2] - n.point[2]).powi(2);
        if d2 < *best {
            *best = d2;
        }
        let delta = q[n.axis] - n.point[n.axis];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if near != KD_NONE {
            self.search(near, q, best);
        }
        if far != KD_NONE && delta * delta < *best {
            self.search(far, q, best);
        }
    }
}

/// Symmetric chamfer distance between flat xyz arrays: the average of
/// the two directed means of unsquared nearest-neighbour distances.
/// Exact — the spatial index prunes but never approximates.
pub fn chamfer(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() % 3 != 0 || b.len() % 3 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "point buffers of {} and {} values are not xyz triples",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let ta = KdTree::build(a);
    let tb = KdTree::build(b);
    let directed = |from: &[f64], to: &KdTree| -> f64 {
        let n = from.len() / 3;
        let mut total = 0.0;
        for p in from.chunks_exact(3) {
            total += to.nearest_sq([p[0], p[1], p[2]]).sqrt();
        }
        total / n as f64
    };
    Ok(0.5 * (directed(a, &tb) + directed(b, &ta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::testkit;

    fn noise_image(w: usize, h: usize, rng: &mut SplitMix64) -> ImageRgb {
        let mut img = ImageRgb::zeros(w, h);
        for v in img.data.iter_mut() {
            *v = rng.next_f64();
        }
        img
    }

    #[test]
    fn psnr_analytic_cases() {
        let mut rng = SplitMix64::new(1);
        let a = noise_image(8, 6, &mut rng);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);

        // Uniform offsets: MSE is the squared offset.
        let mut b = a.clone();
        for v in b.data.iter_mut() {
            *v += 0.1;
        }
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        let mut c = ImageRgb::zeros(8, 6);
        let d = ImageRgb::zeros(8, 6);
        for v in c.data.iter_mut() {
            *v = 1.0;
        }
        assert_eq!(psnr(&c, &d).unwrap(), 0.0);
    }

    #[test]
    fn psnr_is_symmetric_and_checks_dims() {
        let mut rng = SplitMix64::new(2);
        let a = noise_image(9, 5, &mut rng);
        let b = noise_image(9, 5, &mut rng);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let c = ImageRgb::zeros(5, 9);
        assert!(psnr(&a, &c).is_err());
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let mut rng = SplitMix64::new(3);
        let a = noise_image(16, 16, &mut rng);
        let noise: Vec<f64> = (0..a.data.len()).map(|_| rng.next_f64() - 0.5).collect();
        let mut prev = f64::INFINITY;
        for amp in [0.01, 0.05, 0.2, 0.5] {
            let mut b = a.clone();
            for (v, nz) in b.data.iter_mut().zip(noise.iter()) {
                *v += amp * nz;
            }
            let p = psnr(&a, &b).unwrap();
            assert!(p < prev, "amp {amp}: {p} !< {prev}");
            prev = p;
        }
    }

    #[test]
    fn ssim_of_identical_images_is_one() {
        let mut rng = SplitMix64::new(4);
        let a = noise_image(13, 11, &mut rng);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn ssim_midgray_negative_is_degenerate_identity() {
        let mut a = ImageRgb::zeros(12, 12);
        for v in a.data.iter_mut() {
            *v = 0.5;
        }
        let mut b = a.clone();
        for v in b.data.iter_mut() {
            *v = 1.0 - *v;
        }
        assert_eq!(ssim(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn ssim_matches_direct_convolution_oracle() {
        let mut rng = SplitMix64::new(5);
        for (w, h) in [(11, 11), (16, 12), (23, 17)] {
            let a = noise_image(w, h, &mut rng);
            let b = noise_image(w, h, &mut rng);
            let fast = ssim(&a, &b).unwrap();
            let slow = testkit::ssim_direct(&a, &b);
            assert!(
                (fast - slow).abs() <= 1e-9,
                "{w}x{h}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn ssim_rejects_small_and_mismatched_images() {
        let a = ImageRgb::zeros(10, 20);
        assert!(matches!(ssim(&a, &a), Err(Error::ImageTooSmall(_))));
        let b = ImageRgb::zeros(20, 20);
        let c = ImageRgb::zeros(20, 21);
        assert!(matches!(ssim(&b, &c), Err(Error::DimensionMismatch(_))));
    }

    fn random_cloud(n: usize, rng: &mut SplitMix64, scale: f64) -> Vec<f64> {
        (0..3 * n).map(|_| (rng.next_f64() - 0.5) * scale).collect()
    }

    #[test]
    fn chamfer_analytic_cases() {
        let a = vec![0.0, 0.0, 0.0];
        let b = vec![1.0, 0.0, 0.0];
        assert_eq!(chamfer(&a, &b).unwrap(), 1.0);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        let mut rng = SplitMix64::new(6);
        let c = random_cloud(50, &mut rng, 4.0);
        assert_eq!(chamfer(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn chamfer_matches_brute_force() {
        let mut rng = SplitMix64::new(7);
        for trial in 0..20 {
            let n = 1 + rng.uniform_index(200);
            let m = 1 + rng.uniform_index(200);
            let a = random_cloud(n, &mut rng, 10.0);
            let b = random_cloud(m, &mut rng, 10.0);
            let fast = chamfer(&a, &b).unwrap();
            let slow = testkit::brute_chamfer(&a, &b);
            assert!(
                (fast - slow).abs() <= 1e-12,
                "trial {trial}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn chamfer_handles_degenerate_geometry() {
        let mut rng = SplitMix64::new(8);
        // Collinear points: zero spread on two axes.
        let a: Vec<f64> = (0..60).flat_map(|i| [i as f64, 0.0, 0.0]).collect();
        let b: Vec<f64> = (0..40).flat_map(|i| [i as f64 + 0.25, 0.0, 0.0]).collect();
        assert!((chamfer(&a, &b).unwrap() - testkit::brute_chamfer(&a, &b)).abs() <= 1e-12);
        // Heavy duplication.
        let mut c = random_cloud(10, &mut rng, 1.0);
        let dup = c.clone();
        c.extend_from_slice(&dup);
        c.extend_from_slice(&dup);
        let d = random_cloud(25, &mut rng, 1.0);
        assert!((chamfer(&c, &d).unwrap() - testkit::brute_chamfer(&c, &d)).abs() <= 1e-12);
    }

    #[test]
    fn chamfer_is_symmetric() {
        let mut rng = SplitMix64::new(9);
        let a = random_cloud(33, &mut rng, 2.0);
        let b = random_cloud(77, &mut rng, 2.0);
        assert_eq!(chamfer(&a, &b).unwrap(), chamfer(&b, &a).unwrap());
    }

    #[test]
    fn chamfer_rejects_bad_inputs() {
        assert!(matches!(chamfer(&[], &[1.0, 2.0, 3.0]), Err(Error::EmptyCloud)));
        assert!(matches!(chamfer(&[1.0, 2.0, 3.0], &[]), Err(Error::EmptyCloud)));
        assert!(matches!(
            chamfer(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
