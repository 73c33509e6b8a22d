//! Plain-text camera list. First line is `SPWZCAM 1`; each following
//! non-comment line is one camera:
//!
//! ```text
//! name width height fx fy cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz
//! ```
//!
//! `#` starts a comment. Rotations within 1e-3 of orthonormal are snapped
//! back onto SO(3); anything worse is rejected.

use crate::error::{Error, Result};
use crate::scene::Camera;
use std::collections::HashSet;
use std::io::{BufWriter, Write};
use std::path::Path;

pub fn read_cameras(path: &Path) -> Result<Vec<Camera>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let header = loop {
        match lines.next() {
            None => return Err(Error::CameraFormat("empty file".into())),
            Some((_, l)) => {
                let l = l.trim();
                if l.is_empty() || l.starts_with('#') {
                    continue;
                }
                break l.to_string();
            }
        }
    };
    if header != "SPWZCAM 1" {
        return Err(Error::CameraFormat(format!(
            "bad header line '{header}', expected 'SPWZCAM 1'"
        )));
    }

    let mut cameras = Vec::new();
    let mut names = HashSet::new();
    for (lineno, raw) in lines {
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = l.split_whitespace().collect();
        if tokens.len() != 19 {
            return Err(Error::CameraFormat(format!(
                "line {}: expected 19 fields, found {}",
                lineno + 1,
                tokens.len()
            )));
        }
        let name = tokens[0].to_string();
        if !names.insert(name.clone()) {
            return Err(Error::CameraFormat(format!(
                "line {}: duplicate camera name '{name}'",
                lineno + 1
            )));
        }
        let parse_u32 = |s: &str, what: &str| -> Result<u32> {
            s.parse::<u32>().map_err(|_| {
                Error::CameraFormat(format!("line {}: bad {what} '{s}'", lineno + 1))
            })
        };
        let parse_f64 = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                Error::CameraFormat(format!("line {}: bad {what} '{s}'", lineno + 1))
            })
        };
        let width = parse_u32(tokens[1], "width")?;
        let height = parse_u32(tokens[2], "height")?;
        let fx = parse_f64(tokens[3], "fx")?;
        let fy = parse_f64(tokens[4], "fy")?;
        let cx = parse_f64(tokens[5], "cx")?;
        let cy = parse_f64(tokens[6], "cy")?;
        let mut rest = [0.0f64; 12];
        for (k, slot) in rest.iter_mut().enumerate() {
            *slot = parse_f64(tokens[7 + k], "matrix entry")?;
        }
        let rotation = [
            [rest[0], rest[1], rest[2]],
            [rest[3], rest[4], rest[5]],
            [rest[6], rest[7], rest[8]],
        ];
        let translation = [rest[9], rest[10], rest[11]];

        let mut cam = Camera {
            name,
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
        };
        let err = cam.orthonormality_error();
        if err > 1e-3 || cam.determinant() <= 0.0 {
            return Err(Error::Pose(format!(
                "camera '{}': rotation too far from orthonormal (err {:.2e}, det {:.4})",
                cam.name,
                err,
                cam.determinant()
            )));
        }
        if err > 1e-9 {
            cam.rotation = reorthonormalize(&cam.rotation);
        }
        cam.validate()?;
        cameras.push(cam);
    }
    Ok(cameras)
}

/// Gram-Schmidt on the rows; valid for inputs already close to a rotation.
fn reorthonormalize(r: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let norm = |v: [f64; 3]| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    };
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let r0 = norm(r[0]);
    let mut r1 = r[1];
    let d = dot(r1, r0);
    for k in 0..3 {
        r1[k] -= d * r0[k];
    }
    let r1 = norm(r1);
    // Third row as the cross product keeps det = +1 exactly.
    let r2 = [
        r0[1] * r1[2] - r0[2] * r1[1],
        r0[2] * r1[0] - r0[0] * r1[2],
        r0[0] * r1[1] - r0[1] * r1[0],
    ];
    [r0, r1, r2]
}

pub fn write_cameras(cameras: &[Camera], path: &Path) -> Result<()> {
    let mut names = HashSet::new();
    for cam in cameras {
        cam.validate()?;
        if cam.name.chars().any(|c| c.is_whitespace()) {
            return Err(Error::CameraFormat(format!(
                "camera name '{}' contains whitespace",
                cam.name
            )));
        }
        if !names.insert(&cam.name) {
            return Err(Error::CameraFormat(format!(
                "duplicate camera name '{}'",
                cam.name
            )));
        }
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "SPWZCAM 1")?;
    for cam in cameras {
        // `{}` prints the shortest string that parses back to the same f64,
        // so write/read roundtrips are exact.
        write!(
            w,
            "{} {} {} {} {} {} {}",
            cam.name, cam.width, cam.height, cam.fx, cam.fy, cam.cx, cam.cy
        )?;
        for row in &cam.rotation {
            for v in row {
                write!(w, " {v}")?;
            }
        }
        for v in &cam.translation {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
