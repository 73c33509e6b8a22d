//! Vector quantization of spherical-harmonic coefficient blocks.
//!
//! Higher-order colour coefficients are highly redundant across a
//! scene, so instead of storing each block we fit a small codebook with
//! k-means and store one index per Gaussian. Initialization uses the
//! k-means++ scheme (each new seed drawn with probability proportional
//! to its squared distance from the nearest existing seed), which gives
//! provable O(log k) expected distortion bounds and, more practically,
//! avoids the empty-cluster pathologies of uniform seeding.
//!
//! Determinism matters here: the codebook is refit when verifying a
//! container, so for a fixed seed the fit must be reproducible across
//! machines and thread counts. All randomness comes from one
//! [`SplitMix64`] stream and the Lloyd updates are order-stable.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Maximum Lloyd refinement sweeps.
const MAX_LLOYD_ITERS: usize = 30;
/// Stop when the relative distortion improvement drops below this.
const REL_TOL: f64 = 1e-6;

/// A fitted codebook and the assignment of every input vector.
#[derive(Debug, Clone)]
pub struct Codebook {
    /// Vector dimensionality.
    pub dim: usize,
    /// `k * dim` centroid coordinates, row-major.
    pub centroids: Vec<f64>,
    /// One codebook index per input vector.
    pub assignments: Vec<u32>,
    /// Mean squared L2 distance from each vector to its centroid.
    pub distortion: f64,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.centroids.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Centroid row for a stored index.
    pub fn centroid(&self, index: u32) -> &[f64] {
        let d = self.dim;
        &self.centroids[index as usize * d..(index as usize + 1) * d]
    }

    /// Reconstruct the full vector set from assignments.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.assignments.len() * self.dim);
        for &a in &self.assignments {
            out.extend_from_slice(self.centroid(a));
        }
        out
    }
}

/// Squared L2 distance between two equal-length slices.
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid, ties broken toward the lower index.
fn nearest(v: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = dist_sq(v, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    (best, best_d)
}

/// Fit a `k`-entry codebook to `vectors` (rows of `dim` values).
pub fn fit_codebook(
    vectors: &[f64],
    dim: usize,
    k: usize,
    seed: u64,
) -> Result<Codebook> {
    if dim == 0 {
        return Err(Error::Config("vector dimension must be positive".into()));
    }
    if vectors.len() % dim != 0 {
        return Err(Error::Config(format!(
            "vector buffer of length {} is not rows of {dim}",
            vectors.len()
        )));
    }
    let n = vectors.len() / dim;
    if n == 0 {
        return Err(Error::Config("cannot fit a codebook to zero vectors".into()));
    }
    if k == 0 {
        return Err(Error::Config("codebook size must be positive".into()));
    }
    if let Some(bad) = vectors.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidScene(format!(
            "non-finite value at flat index {bad} during codebook fit"
        )));
    }

    let row = |i: usize| &vectors[i * dim..(i + 1) * dim];
    let mut rng = SplitMix64::new(seed);
    let mut centroids: Vec<f64> = Vec::with_capacity(k * dim);

    if k >= n {
        // Every vector can have its own centroid; cycle through the
        // data to fill any surplus entries.
        for i in 0..k {
            centroids.extend_from_slice(row(i % n));
        }
    } else {
        // k-means++ seeding with incrementally maintained distances.
        let first = rng.uniform_index(n);
        centroids.extend_from_slice(row(first));
        let mut best_d: Vec<f64> = (0..n)
            .map(|i| dist_sq(row(i), row(first)))
            .collect();
        while centroids.len() < k * dim {
            let total: f64 = best_d.iter().sum();
            let chosen = if total > 0.0 {
                let r = rng.next_f64() * total;
                let mut acc = 0.0;
                let mut pick = n - 1;
                for (i, &d) in best_d.iter().enumerate() {
                    acc += d;
                    if r < acc {
                        pick = i;
                        break;
                    }
                }
                pick
            } else {
                // All residual distances vanished (fewer distinct
                // vectors than k); fall back to uniform choice.
                rng.uniform_index(n)
            };
            let c = row(chosen).to_vec();
            centroids.extend_from_slice(&c);
            for i in 0..n {
                let d = dist_sq(row(i), &c);
                if d < best_d[i] {
                    best_d[i] = d;
                }
            }
        }
    }

    let mut assignments = vec![0u32; n];
    let mut distortion = f64::INFINITY;
    for _ in 0..MAX_LLOYD_ITERS {
        // Assignment step; order-independent, so safe to parallelize.
        let assign: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| nearest(row(i), &centroids, dim))
            .collect();
        let mut total = 0.0;
        for (i, &(j, d)) in assign.iter().enumerate() {
            assignments[i] = j as u32;
            total += d;
        }
        let current = total / n as f64;

        // Update step: empty clusters keep their previous centroid.
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0u64; k];
        for i in 0..n {
            let j = assignments[i] as usize;
            counts[j] += 1;
            for (s, v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for d in 0..dim {
                    centroids[j * dim + d] = sums[j * dim + d] / counts[j] as f64;
                }
            }
        }

        let improved = distortion.is_infinite()
            || (distortion - current).abs() > REL_TOL * distortion.max(1e-12);
        distortion = current;
        if !improved {
            break;
        }
    }

    // Final assignment against the last centroid update so that the
    // stored indices match the stored codebook exactly.
    let assign: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| nearest(row(i), &centroids, dim))
        .collect();
    let mut total = 0.0;
    for (i, &(j, d)) in assign.iter().enumerate() {
        assignments[i] = j as u32;
        total += d;
    }
    distortion = total / n as f64;

    Ok(Codebook {
        dim,
        centroids,
        assignments,
        distortion,
    })
}
