//! Uniform scalar quantization over per-channel min/max grids.
//!
//! Each attribute family (positions, rotations, log-scales, opacity
//! logits, DC colour) gets its own grid: one (min, max) interval per
//! channel, shared by every Gaussian. A value maps to the nearest of
//! 2^bits lattice points on its channel interval.
//!
//! The interval endpoints are stored in the compressed container as
//! f32. To make the encoder's reconstruction *bit-identical* to what a
//! decoder computes from the file, the endpoints are snapped through
//! f32 at fit time and all arithmetic uses the snapped values.

use crate::error::{Error, Result};

/// Per-channel uniform quantization lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantGrid {
    /// Lattice resolution: 8 or 16 bits per value.
    pub bits: u8,
    /// Channel lower bounds, already snapped through f32.
    pub channel_min: Vec<f64>,
    /// Channel upper bounds, already snapped through f32.
    pub channel_max: Vec<f64>,
}

impl QuantGrid {
    /// Fit a grid to `values`, interpreted as rows of `channels`
    /// interleaved channels. Endpoints are the observed per-channel
    /// min/max, snapped through f32.
    pub fn fit(values: &[f64], channels: usize, bits: u8) -> Result<QuantGrid> {
        if bits != 8 && bits != 16 {
            return Err(Error::Config(format!(
                "quantization bits must be 8 or 16, got {bits}"
            )));
        }
        if channels == 0 || values.len() % channels != 0 {
            return Err(Error::Config(format!(
                "value buffer of length {} is not rows of {channels} channels",
                values.len()
            )));
        }
        let mut lo = vec![f64::INFINITY; channels];
        let mut hi = vec![f64::NEG_INFINITY; channels];
        for row in values.chunks_exact(channels) {
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidScene(format!(
                        "non-finite value in channel {c} during quantization"
                    )));
                }
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
        if values.is_empty() {
            lo = vec![0.0; channels];
            hi = vec![0.0; channels];
        }
        // Snap through f32: the container stores endpoints as f32, so
        // widen each interval to the f32 values that still contain the
        // data, then keep the snapped numbers for all arithmetic.
        for c in 0..channels {
            let mut l = lo[c] as f32;
            if (l as f64) > lo[c] {
                l = next_f32_down(l);
            }
            let mut h = hi[c] as f32;
            if (h as f64) < hi[c] {
                h = next_f32_up(h);
            }
            lo[c] = l as f64;
            hi[c] = h as f64;
        }
        Ok(QuantGrid {
            bits,
            channel_min: lo,
            channel_max: hi,
        })
    }

    pub fn channels(&self) -> usize {
        self.channel_min.len()
    }

    /// Number of lattice points minus one, as f64.
    fn steps(&self) -> f64 {
        ((1u32 << self.bits) - 1) as f64
    }

    /// Quantize interleaved rows; output is one symbol per value.
    /// Values outside the fitted interval clamp to the boundary.
    pub fn quantize(&self, values: &[f64]) -> Result<Vec<u16>> {
        let ch = self.channels();
        if values.len() % ch != 0 {
            return Err(Error::Config(format!(
                "value buffer of length {} is not rows of {ch} channels",
                values.len()
            )));
        }
        let steps = self.steps();
        let mut out = Vec::with_capacity(values.len());
        for row in values.chunks_exact(ch) {
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidScene(format!(
                        "non-finite value in channel {c} during quantization"
                    )));
                }
                let lo = self.channel_min[c];
                let hi = self.channel_max[c];
                let q = if hi <= lo {
                    0.0
                } else {
                    (((v - lo) / (hi - lo)) * steps).round().clamp(0.0, steps)
                };
                out.push(q as u16);
            }
        }
        Ok(out)
    }

    /// Reconstruct values from symbols produced by [`Self::quantize`].
    pub fn dequantize(&self, symbols: &[u16]) -> Result<Vec<f64>> {
        let ch = self.channels();
        if symbols.len() % ch != 0 {
            return Err(Error::Config(format!(
                "symbol buffer of length {} is not rows of {ch} channels",
                symbols.len()
            )));
        }
        let steps = self.steps();
        let mut out = Vec::with_capacity(symbols.len());
        for row in symbols.chunks_exact(ch) {
            for (c, &q) in row.iter().enumerate() {
                let lo = self.channel_min[c];
                let hi = self.channel_max[c];
                if hi <= lo {
                    out.push(lo);
                } else {
                    out.push(lo + (q as f64 / steps) * (hi - lo));
                }
            }
        }
        Ok(out)
    }
}

fn next_f32_up(x: f32) -> f32 {
    if x.is_nan() || x == f32::INFINITY {
        return x;
    }
    let bits = if x == 0.0 { 1 } else if x > 0.0 { x.to_bits() + 1 } else { x.to_bits() - 1 };
    f32::from_bits(bits)
}

fn next_f32_down(x: f32) -> f32 {
    -next_f32_up(-x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn roundtrip_error_is_within_half_a_step() {
        let mut rng = SplitMix64::new(31);
        for &bits in &[8u8, 16] {
            let values: Vec<f64> =
                (0..300).map(|_| rng.next_f64() * 20.0 - 10.0).collect();
            let grid = QuantGrid::fit(&values, 3, bits).unwrap();
            let q = grid.quantize(&values).unwrap();
            let back = grid.dequantize(&q).unwrap();
            let steps = ((1u32 << bits) - 1) as f64;
            for (c, (&v, &r)) in values.iter().zip(back.iter()).enumerate() {
                let width = grid.channel_max[c % 3] - grid.channel_min[c % 3];
                let half_step = width / steps / 2.0;
                // Allow a whisker over half a step for the f32 snap of
                // the endpoints.
                assert!(
                    (v - r).abs() <= half_step * (1.0 + 1e-6) + 1e-12,
                    "bits={bits} v={v} r={r} half={half_step}"
                );
            }
        }
    }

    #[test]
    fn extremes_map_to_lattice_ends() {
        let values = vec![-3.0, 0.5, 7.0, -3.0, 1.0, 7.0];
        let grid = QuantGrid::fit(&values, 1, 8).unwrap();
        let q = grid.quantize(&values).unwrap();
        assert_eq!(q.iter().copied().min(), Some(0));
        assert_eq!(q.iter().copied().max(), Some(255));
    }

    #[test]
    fn constant_channel_degenerates_cleanly() {
        let values = vec![2.5; 12];
        let grid = QuantGrid::fit(&values, 4, 8).unwrap();
        let q = grid.quantize(&values).unwrap();
        assert!(q.iter().all(|&s| s == 0));
        let back = grid.dequantize(&q).unwrap();
        for &v in &back {
            assert_eq!(v, 2.5f32 as f64);
        }
    }

    #[test]
    fn endpoints_are_exactly_representable_as_f32() {
        let mut rng = SplitMix64::new(77);
        let values: Vec<f64> =
            (0..500).map(|_| (rng.next_f64() - 0.5) * 1e3).collect();
        let grid = QuantGrid::fit(&values, 5, 16).unwrap();
        for c in 0..5 {
            assert_eq!(grid.channel_min[c], grid.channel_min[c] as f32 as f64);
            assert_eq!(grid.channel_max[c], grid.channel_max[c] as f32 as f64);
            // The snapped interval still contains every observed value.
            for row in values.chunks_exact(5) {
                assert!(row[c] >= grid.channel_min[c]);
                assert!(row[c] <= grid.channel_max[c]);
            }
        }
    }

    #[test]
    fn dequantize_matches_decoder_arithmetic_bit_for_bit() {
        // A decoder reconstructs from the f32 endpoints it reads back
        // from the container. Fitting already snapped the endpoints, so
        // reconstructing through an f32 store must be bit-identical.
        let mut rng = SplitMix64::new(5);
        let values: Vec<f64> = (0..90).map(|_| rng.next_f64() * 4.0).collect();
        let grid = QuantGrid::fit(&values, 3, 8).unwrap();
        let q = grid.quantize(&values).unwrap();

        let stored: Vec<(f32, f32)> = (0..3)
            .map(|c| (grid.channel_min[c] as f32, grid.channel_max[c] as f32))
            .collect();
        let reread = QuantGrid {
            bits: 8,
            channel_min: stored.iter().map(|&(l, _)| l as f64).collect(),
            channel_max: stored.iter().map(|&(_, h)| h as f64).collect(),
        };
        let a = grid.dequantize(&q).unwrap();
        let b = reread.dequantize(&q).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(QuantGrid::fit(&[1.0, 2.0, 3.0], 2, 8).is_err());
        assert!(QuantGrid::fit(&[1.0, 2.0], 2, 12).is_err());
        assert!(QuantGrid::fit(&[1.0, f64::NAN], 2, 8).is_err());
        let grid = QuantGrid::fit(&[0.0, 1.0], 1, 8).unwrap();
        assert!(grid.quantize(&[f64::INFINITY]).is_err());
    }
}
