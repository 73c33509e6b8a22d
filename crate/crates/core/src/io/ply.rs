//! Binary little-endian PLY in the layout splat training tools exchange:
//! one `vertex` element whose properties are, in order, position, normal
//! placeholder, SH DC, SH rest, opacity logit, log scales and quaternion —
//! 62 32-bit floats per vertex. The normal slots are written as zeros and
//! ignored on read.

use crate::error::{Error, Result};
use crate::scene::{GaussianScene, DEFAULT_MASK_LOGIT, SH_REST_WIDTH};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Property names in file order.
fn property_names() -> Vec<String> {
    let mut names = vec!["x", "y", "z", "nx", "ny", "nz"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for i in 0..3 {
        names.push(format!("f_dc_{i}"));
    }
    for i in 0..SH_REST_WIDTH {
        names.push(format!("f_rest_{i}"));
    }
    names.push("opacity".into());
    for i in 0..3 {
        names.push(format!("scale_{i}"));
    }
    for i in 0..4 {
        names.push(format!("rot_{i}"));
    }
    names
}

const FLOATS_PER_VERTEX: usize = 62;

pub fn read_ply(path: &Path) -> Result<GaussianScene> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);

    // The header is ASCII lines terminated by "end_header".
    let mut line = String::new();
    let mut read_line = |reader: &mut BufReader<std::fs::File>| -> Result<String> {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(Error::PlyFormat("unexpected end of header".into()));
        }
        Ok(line.trim_end_matches(['\r', '\n']).to_string())
    };

    if read_line(&mut reader)? != "ply" {
        return Err(Error::PlyFormat("missing 'ply' magic line".into()));
    }
    if read_line(&mut reader)? != "format binary_little_endian 1.0" {
        return Err(Error::PlyFormat(
            "expected 'format binary_little_endian 1.0'".into(),
        ));
    }

    let expected = property_names();
    let mut count: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    loop {
        let l = read_line(&mut reader)?;
        if l == "end_header" {
            break;
        }
        if l.starts_with("comment") || l.starts_with("obj_info") {
            continue;
        }
        if let Some(rest) = l.strip_prefix("element ") {
            let mut it = rest.split_whitespace();
            let name = it.next().unwrap_or("");
            if name != "vertex" {
                return Err(Error::PlyFormat(format!(
                    "unsupported element '{name}' (only 'vertex' is accepted)"
                )));
            }
            if count.is_some() {
                return Err(Error::PlyFormat("duplicate vertex element".into()));
            }
            let n = it
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::PlyFormat("bad vertex count".into()))?;
            count = Some(n);
        } else if let Some(rest) = l.strip_prefix("property ") {
            if count.is_none() {
                return Err(Error::PlyFormat(
                    "property before any element declaration".into(),
                ));
            }
            let mut it = rest.split_whitespace();
            let ty = it.next().unwrap_or("");
            let name = it.next().unwrap_or("").to_string();
            let idx = props.len();
            if idx >= expected.len() {
                return Err(Error::PlyFormat(format!("unexpected extra property '{name}'")));
            }
            if name != expected[idx] {
                return Err(Error::PlyFormat(format!(
                    "property {idx}: expected '{}', found '{name}'",
                    expected[idx]
                )));
            }
            if ty != "float" {
                return Err(Error::PlyFormat(format!(
                    "property '{name}': expected type float, found '{ty}'"
                )));
            }
            props.push(name);
        } else {
            return Err(Error::PlyFormat(format!("unrecognized header line '{l}'")));
        }
    }
    let n = count.ok_or_else(|| Error::PlyFormat("missing vertex element".into()))?;
    if props.len() != expected.len() {
        return Err(Error::PlyFormat(format!(
            "missing property '{}'",
            expected[props.len()]
        )));
    }

    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let want = n * FLOATS_PER_VERTEX * 4;
    if payload.len() < want {
        return Err(Error::PlyFormat(format!(
            "truncated payload: {} bytes, expected {want}",
            payload.len()
        )));
    }
    if payload.len() > want {
        return Err(Error::PlyFormat(format!(
            "trailing bytes after vertex data: {} extra",
            payload.len() - want
        )));
    }

    let mut scene = GaussianScene::empty(3);
    scene.positions.reserve(3 * n);
    scene.rotation_params.reserve(4 * n);
    scene.log_scales.reserve(3 * n);
    scene.opacity_logits.reserve(n);
    scene.sh_dc.reserve(3 * n);
    scene.sh_rest.reserve(SH_REST_WIDTH * n);
    scene.mask_logits.reserve(n);

    let mut floats = [0.0f32; FLOATS_PER_VERTEX];
    for v in 0..n {
        let base = v * FLOATS_PER_VERTEX * 4;
        for (k, f) in floats.iter_mut().enumerate() {
            let o = base + 4 * k;
            *f = f32::from_le_bytes(payload[o..o + 4].try_into().unwrap());
        }
        scene.positions.extend(floats[0..3].iter().map(|&x| x as f64));
        // floats[3..6] are the normal placeholders, dropped
        scene.sh_dc.extend(floats[6..9].iter().map(|&x| x as f64));
        scene
            .sh_rest
            .extend(floats[9..9 + SH_REST_WIDTH].iter().map(|&x| x as f64));
        scene.opacity_logits.push(floats[54] as f64);
        scene.log_scales.extend(floats[55..58].iter().map(|&x| x as f64));
        scene
            .rotation_params
            .extend(floats[58..62].iter().map(|&x| x as f64));
        scene.mask_logits.push(DEFAULT_MASK_LOGIT);
    }
    Ok(scene)
}

/// Serialize a scene to PLY bytes (the exact content [`write_ply`]
/// puts on disk).
pub fn ply_bytes(scene: &GaussianScene) -> Result<Vec<u8>> {
    if let Some(v) = scene.validate().first() {
        return Err(Error::InvalidScene(format!(
            "{}: {}",
            v.field, v.detail
        )));
    }
    let n = scene.count();
    let mut out = Vec::with_capacity(256 + n * FLOATS_PER_VERTEX * 4);
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {n}\n").as_bytes());
    for name in property_names() {
        out.extend_from_slice(format!("property float {name}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");

    let put = |out: &mut Vec<u8>, v: f64| {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    };
    for i in 0..n {
        for v in scene.position(i) {
            put(&mut out, v);
        }
        for _ in 0..3 {
            put(&mut out, 0.0); // normals: placeholders
        }
        for v in scene.sh_dc_row(i) {
            put(&mut out, v);
        }
        for &v in scene.sh_rest_row(i) {
            put(&mut out, v);
        }
        put(&mut out, scene.opacity_logits[i]);
        for v in scene.log_scale(i) {
            put(&mut out, v);
        }
        for v in scene.rotation_param(i) {
            put(&mut out, v);
        }
    }
    Ok(out)
}

pub fn write_ply(scene: &GaussianScene, path: &Path) -> Result<()> {
    let bytes = ply_bytes(scene)?;
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}
