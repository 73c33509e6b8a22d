//! Scene model: a set of 3D Gaussians with spherical-harmonics appearance,
//! pinhole cameras, and the float image type the rasterizer produces.

use crate::error::{Error, Result};
use crate::sigmoid;

/// Total spherical-harmonics coefficients per color channel at degree 3.
pub const SH_COEFFS: usize = 16;
/// Rest coefficients (everything above the DC term) per color channel.
pub const SH_REST_PER_CHANNEL: usize = SH_COEFFS - 1;
/// Width of one `sh_rest` row: 15 coefficients for R, then G, then B.
pub const SH_REST_WIDTH: usize = 3 * SH_REST_PER_CHANNEL;

/// Default mask logit for freshly loaded or generated scenes: far on the
/// "keep the degree-3 band" side of the threshold.
pub const DEFAULT_MASK_LOGIT: f64 = 8.0;

/// A scene of `N` Gaussians stored as flat column arrays.
///
/// Layouts, all row-major per Gaussian:
/// - `positions`: 3N world positions
/// - `rotation_params`: 4N quaternions as (w, x, y, z), not necessarily
///   normalized; they are normalized wherever a rotation is actually used
/// - `log_scales`: 3N log standard deviations along the local axes
/// - `opacity_logits`: N, opacity is `sigmoid(logit)`
/// - `sh_dc`: 3N DC spherical-harmonics coefficients (R, G, B)
/// - `sh_rest`: 45N higher-order coefficients, channel-major (15 for R,
///   then 15 for G, then 15 for B)
/// - `mask_logits`: N logits gating the degree-3 band
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScene {
    pub positions: Vec<f64>,
    pub rotation_params: Vec<f64>,
    pub log_scales: Vec<f64>,
    pub opacity_logits: Vec<f64>,
    pub sh_dc: Vec<f64>,
    pub sh_rest: Vec<f64>,
    pub mask_logits: Vec<f64>,
    /// Highest SH degree the renderer evaluates, in 0..=3.
    pub max_sh_degree: u8,
}

impl GaussianScene {
    /// An empty scene at the given SH degree.
    pub fn empty(max_sh_degree: u8) -> Self {
        GaussianScene {
            positions: Vec::new(),
            rotation_params: Vec::new(),
            log_scales: Vec::new(),
            opacity_logits: Vec::new(),
            sh_dc: Vec::new(),
            sh_rest: Vec::new(),
            mask_logits: Vec::new(),
            max_sh_degree,
        }
    }

    pub fn count(&self) -> usize {
        self.opacity_logits.len()
    }

    #[inline]
    pub fn position(&self, i: usize) -> [f64; 3] {
        let p = &self.positions[3 * i..3 * i + 3];
        [p[0], p[1], p[2]]
    }

    #[inline]
    pub fn rotation_param(&self, i: usize) -> [f64; 4] {
        let q = &self.rotation_params[4 * i..4 * i + 4];
        [q[0], q[1], q[2], q[3]]
    }

    #[inline]
    pub fn log_scale(&self, i: usize) -> [f64; 3] {
        let s = &self.log_scales[3 * i..3 * i + 3];
        [s[0], s[1], s[2]]
    }

    #[inline]
    pub fn opacity(&self, i: usize) -> f64 {
        sigmoid(self.opacity_logits[i])
    }

    #[inline]
    pub fn sh_dc_row(&self, i: usize) -> [f64; 3] {
        let d = &self.sh_dc[3 * i..3 * i + 3];
        [d[0], d[1], d[2]]
    }

    #[inline]
    pub fn sh_rest_row(&self, i: usize) -> &[f64] {
        &self.sh_rest[SH_REST_WIDTH * i..SH_REST_WIDTH * (i + 1)]
    }

    /// Unit quaternion for Gaussian `i`; errors if the stored parameters
    /// are too close to zero to normalize.
    pub fn normalized_rotation(&self, i: usize) -> Result<[f64; 4]> {
        let q = self.rotation_param(i);
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if n < 1e-12 {
            return Err(Error::DegenerateRotation(i));
        }
        Ok([q[0] / n, q[1] / n, q[2] / n, q[3] / n])
    }

    /// Axis-aligned bounding box of the positions as (min, max).
    /// Returns zeros for an empty scene.
    pub fn aabb(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for i in 0..self.count() {
            let p = self.position(i);
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if self.count() == 0 {
            return ([0.0; 3], [0.0; 3]);
        }
        (lo, hi)
    }

    /// Length of the AABB diagonal.
    pub fn aabb_diagonal(&self) -> f64 {
        let (lo, hi) = self.aabb();
        let d = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    /// Check all array lengths against the Gaussian count and all values for
    /// finiteness. Returns one violation per offending field/index.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.count();
        let mut out = Vec::new();
        let mut check_len = |name: &'static str, len: usize, want: usize| {
            if len != want {
                out.push(Violation {
                    field: name,
                    index: usize::MAX,
                    detail: format!("length {len}, expected {want}"),
                });
            }
        };
        check_len("positions", self.positions.len(), 3 * n);
        check_len("rotation_params", self.rotation_params.len(), 4 * n);
        check_len("log_scales", self.log_scales.len(), 3 * n);
        check_len("sh_dc", self.sh_dc.len(), 3 * n);
        check_len("sh_rest", self.sh_rest.len(), SH_REST_WIDTH * n);
        check_len("mask_logits", self.mask_logits.len(), n);
        if self.max_sh_degree > 3 {
            out.push(Violation {
                field: "max_sh_degree",
                index: usize::MAX,
                detail: format!("{} not in 0..=3", self.max_sh_degree),
            });
        }
        let fields: [(&'static str, &[f64], usize); 7] = [
            ("positions", &self.positions, 3),
            ("rotation_params", &self.rotation_params, 4),
            ("log_scales", &self.log_scales, 3),
            ("opacity_logits", &self.opacity_logits, 1),
            ("sh_dc", &self.sh_dc, 3),
            ("sh_rest", &self.sh_rest, SH_REST_WIDTH),
            ("mask_logits", &self.mask_logits, 1),
        ];
        for (name, data, stride) in fields {
            for (k, v) in data.iter().enumerate() {
                if !v.is_finite() {
                    out.push(Violation {
                        field: name,
                        index: k / stride,
                        detail: format!("non-finite value {v}"),
                    });
                }
            }
        }
        out
    }

    /// Like [`validate`](Self::validate) but collapses the report into an
    /// error naming the first violation.
    pub fn validated(self) -> Result<Self> {
        match self.validate().first() {
            None => Ok(self),
            Some(v) => Err(Error::InvalidScene(format!(
                "{} (gaussian {}): {}",
                v.field,
                if v.index == usize::MAX { "-".into() } else { v.index.to_string() },
                v.detail
            ))),
        }
    }
}

/// One validation failure: which field, which Gaussian (or `usize::MAX` for
/// a whole-array problem), and what was wrong.
#[derive(Debug, Clone)]
pub struct Violation {
    pub field: &'static str,
    pub index: usize,
    pub detail: String,
}

/// Pinhole camera with a world-to-camera rigid transform.
///
/// `rotation` rows are the camera axes expressed in world coordinates, so a
/// world point `p` maps to camera space as `R * p + translation`; the camera
/// looks along +z.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Camera {
    /// World point to camera space.
    #[inline]
    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + self.translation[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + self.translation[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + self.translation[2],
        ]
    }

    /// Camera center in world coordinates (`-R^T t`).
    pub fn center(&self) -> [f64; 3] {
        let r = &self.rotation;
        let t = self.translation;
        [
            -(r[0][0] * t[0] + r[1][0] * t[1] + r[2][0] * t[2]),
            -(r[0][1] * t[0] + r[1][1] * t[1] + r[2][1] * t[2]),
            -(r[0][2] * t[0] + r[1][2] * t[1] + r[2][2] * t[2]),
        ]
    }

    /// Max absolute entry of `R^T R - I`; zero for a perfect rotation.
    pub fn orthonormality_error(&self) -> f64 {
        let r = &self.rotation;
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rotation;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    /// Intrinsics and extrinsics sanity check used by loaders and the
    /// renderer: positive dimensions and focal lengths, finite values, and a
    /// proper rotation to 1e-6.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Pose(format!(
                "camera '{}': zero image dimension",
                self.name
            )));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Pose(format!(
                "camera '{}': non-positive focal length",
                self.name
            )));
        }
        let vals = [self.fx, self.fy, self.cx, self.cy];
        if vals.iter().any(|v| !v.is_finite())
            || self.translation.iter().any(|v| !v.is_finite())
            || self.rotation.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::Pose(format!(
                "camera '{}': non-finite parameter",
                self.name
            )));
        }
        if self.orthonormality_error() > 1e-6 || (self.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::Pose(format!(
                "camera '{}': rotation is not orthonormal (err {:.2e}, det {:.6})",
                self.name,
                self.orthonormality_error(),
                self.determinant()
            )));
        }
        Ok(())
    }
}

/// Row-major H x W x 3 float image; the renderer clamps values to [0, 1]
/// at its output boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ImageRgb {
    pub fn zeros(width: usize, height: usize) -> Self {
        ImageRgb {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, c: [f64; 3]) {
        let o = (y * self.width + x) * 3;
        self.data[o] = c[0];
        self.data[o + 1] = c[1];
        self.data[o + 2] = c[2];
    }

    /// 8-bit conversion used by image dumps: `round(255 * clamp(v, 0, 1))`.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (255.0 * v.clamp(0.0, 1.0)).round() as u8)
            .collect()
    }

    /// Binary PPM (P6) bytes; the canonical dump format for golden hashes.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_rgb8());
        out
    }
}
