//! Real spherical-harmonics basis up to degree 3, in the band ordering used
//! by splat appearance models: index 0 is DC, 1..=3 degree 1, 4..=8 degree 2,
//! 9..=15 degree 3.

pub const SH_C0: f64 = 0.28209479177387814;
pub const SH_C1: f64 = 0.4886025119029199;
pub const SH_C2: [f64; 5] = [
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
];
pub const SH_C3: [f64; 7] = [
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
];

/// First degree-3 basis index; coefficients from here up are the ones the
/// per-Gaussian mask gates.
pub const DEG3_START: usize = 9;

/// Basis coefficients per degree: `(deg + 1)^2`.
pub fn coeffs_for_degree(deg: u8) -> usize {
    let d = deg as usize + 1;
    d * d
}

/// Evaluate the basis at direction `dir` for all bands up to `max_deg`.
/// Entries above the requested degree are zero. `dir` is normally a unit
/// vector; a zero vector degrades gracefully to DC-only.
pub fn sh_basis(dir: [f64; 3], max_deg: u8) -> [f64; 16] {
    let mut b = [0.0; 16];
    b[0] = SH_C0;
    if max_deg == 0 {
        return b;
    }
    let [x, y, z] = dir;
    b[1] = -SH_C1 * y;
    b[2] = SH_C1 * z;
    b[3] = -SH_C1 * x;
    if max_deg == 1 {
        return b;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    b[4] = SH_C2[0] * xy;
    b[5] = SH_C2[1] * yz;
    b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    b[7] = SH_C2[3] * xz;
    b[8] = SH_C2[4] * (xx - yy);
    if max_deg == 2 {
        return b;
    }
    b[9] = SH_C3[0] * y * (3.0 * xx - yy);
    b[10] = SH_C3[1] * xy * z;
    b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    b[14] = SH_C3[5] * z * (xx - yy);
    b[15] = SH_C3[6] * x * (xx - 3.0 * yy);
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_truncation() {
        let dir = [0.6, 0.48, 0.64];
        let b1 = sh_basis(dir, 1);
        assert!(b1[4..].iter().all(|&v| v == 0.0));
        let b3 = sh_basis(dir, 3);
        assert_eq!(b1[..4], b3[..4]);
        assert!(b3[9..].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn dc_is_constant() {
        assert_eq!(sh_basis([0.0, 0.0, 1.0], 0)[0], SH_C0);
        assert_eq!(sh_basis([1.0, 0.0, 0.0], 3)[0], SH_C0);
    }

    #[test]
    fn orthonormality_under_sphere_integration() {
        // Monte-Carlo check that the basis functions are orthonormal on the
        // unit sphere: <b_i, b_j> over 4*pi steradians should be the
        // identity. Loose tolerance; this guards the constants, not the RNG.
        let mut rng = crate::rng::SplitMix64::new(17);
        let samples = 200_000;
        let mut gram = [[0.0f64; 16]; 16];
        for _ in 0..samples {
            // uniform direction via normalized gaussian triple
            let v = [rng.normal(), rng.normal(), rng.normal()];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let dir = [v[0] / n, v[1] / n, v[2] / n];
            let b = sh_basis(dir, 3);
            for i in 0..16 {
                for j in 0..16 {
                    gram[i][j] += b[i] * b[j];
                }
            }
        }
        let scale = 4.0 * std::f64::consts::PI / samples as f64;
        for (i, row) in gram.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let got = v * scale;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (got - want).abs() < 0.03,
                    "gram[{i}][{j}] = {got}, want {want}"
                );
            }
        }
    }
}
