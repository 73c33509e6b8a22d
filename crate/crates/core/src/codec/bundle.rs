//! The compressed container: one self-contained binary bundle.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SPWZ" | u8 version | u16 section count = 9
//! directory: 9 x { tag: 4 ASCII bytes, u64 offset, u64 length }
//! section payloads (offsets are absolute file positions)
//! u32 CRC32 (IEEE) over every preceding byte
//! ```
//!
//! Sections, in directory order:
//!
//! - `META`: scene count, SH degree, AABB, the five quantization grids,
//!   coder id, codebook sizes, fit seed.
//! - `POSQ` / `ROTQ` / `SCLQ` / `OPAQ` / `SHDC`: quantized positions,
//!   normalized rotations, log-scales, opacity logits, and DC colour.
//!   Each is stored as one entropy-coded stream per byte plane (low
//!   plane first), so an 8-bit grid has one stream and a 16-bit grid
//!   two.
//! - `MSKB`: the degree-3 keep mask, bit-packed LSB-first, uncoded.
//! - `VQ12`: codebook plus entropy-coded indices for the pooled
//!   degree-1/2 colour block (24 values per Gaussian, every row).
//! - `VQ3 `: codebook plus indices for the degree-3 block (21 values),
//!   stored only for rows whose mask bit is set.
//!
//! Decoding is a pure function of the byte string — nothing from the
//! encoding process is consulted — which is what makes the
//! encoder/decoder isolation testable: the encoder itself obtains its
//! preview scene by decoding the bytes it just produced.

use rayon::prelude::*;

use crate::codec::arith::{arith_decode, arith_encode};
use crate::codec::crc::crc32;
use crate::codec::freq::{build_freq_table, FrequencyTable};
use crate::codec::huffman::{huffman_decode, huffman_encode};
use crate::codec::morton::morton_sort;
use crate::codec::quant::QuantGrid;
use crate::codec::rans::{rans_decode, rans_encode};
use crate::codec::vq::{fit_codebook, Codebook};
use crate::error::{Error, Result};
use crate::prune::{bake_mask, mask_flags, DEG3_PER_CHANNEL};
use crate::render::sh::DEG3_START;
use crate::scene::{GaussianScene, SH_REST_PER_CHANNEL, SH_REST_WIDTH};
use crate::DEFAULT_MASK_THRESHOLD;

/// File magic.
pub const MAGIC: [u8; 4] = *b"SPWZ";
/// Container version this build reads and writes.
pub const VERSION: u8 = 1;

/// Degree-1/2 rest coefficients per channel (the pooled VQ block).
const DEG12_PER_CHANNEL: usize = DEG3_START - 1;
/// Pooled degree-1/2 vector dimension: 8 coefficients x 3 channels.
pub const VQ12_DIM: usize = 3 * DEG12_PER_CHANNEL;
/// Degree-3 vector dimension: 7 coefficients x 3 channels.
pub const VQ3_DIM: usize = 3 * DEG3_PER_CHANNEL;
/// Largest codebook addressable by the two-byte index planes.
pub const MAX_CODEBOOK: usize = 1 << 16;

const SECTION_TAGS: [[u8; 4]; 9] = [
    *b"META", *b"POSQ", *b"ROTQ", *b"SCLQ", *b"OPAQ", *b"SHDC", *b"MSKB", *b"VQ12", *b"VQ3 ",
];

/// Channel counts of the five quantized attribute families, in section
/// order: positions, rotations, log-scales, opacity logits, DC colour.
const GRID_CHANNELS: [usize; 5] = [3, 4, 3, 1, 3];

/// Which entropy coder backs the index and attribute streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoderKind {
    Rans,
    Huffman,
    Arith,
}

impl CoderKind {
    pub fn id(self) -> u8 {
        match self {
            CoderKind::Rans => 0,
            CoderKind::Huffman => 1,
            CoderKind::Arith => 2,
        }
    }

    pub fn from_id(id: u8) -> Result<CoderKind> {
        match id {
            0 => Ok(CoderKind::Rans),
            1 => Ok(CoderKind::Huffman),
            2 => Ok(CoderKind::Arith),
            other => Err(Error::UnknownCoder(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CoderKind::Rans => "rans",
            CoderKind::Huffman => "huffman",
            CoderKind::Arith => "arith",
        }
    }
}

impl std::str::FromStr for CoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<CoderKind> {
        match s {
            "rans" => Ok(CoderKind::Rans),
            "huffman" => Ok(CoderKind::Huffman),
            "arith" => Ok(CoderKind::Arith),
            other => Err(Error::Config(format!(
                "unknown coder '{other}' (expected rans, huffman, or arith)"
            ))),
        }
    }
}

/// Encoder settings. The defaults are the container's native operating
/// point: 16-bit positions, 8-bit scalars, 256-entry codebooks.
#[derive(Debug, Clone)]
pub struct CodecConfig {
    pub position_bits: u8,
    pub scalar_bits: u8,
    /// Codebook entries for the pooled degree-1/2 block.
    pub k12: usize,
    /// Codebook entries for the degree-3 block.
    pub k3: usize,
    pub coder: CoderKind,
    /// Seed for the codebook fits (the degree-3 fit uses `seed + 1`).
    pub seed: u64,
    /// Mask threshold used to bake the degree-3 gate before encoding.
    pub mask_threshold: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            position_bits: 16,
            scalar_bits: 8,
            k12: 256,
            k3: 256,
            coder: CoderKind::Rans,
            seed: 0,
            mask_threshold: DEFAULT_MASK_THRESHOLD,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, bits) in [
            ("position_bits", self.position_bits),
            ("scalar_bits", self.scalar_bits),
        ] {
            if bits != 8 && bits != 16 {
                return Err(Error::Config(format!(
                    "{name} must be 8 or 16, got {bits}"
                )));
            }
        }
        for (name, k) in [("k12", self.k12), ("k3", self.k3)] {
            if k == 0 || k > MAX_CODEBOOK {
                return Err(Error::Config(format!(
                    "{name} must be in 1..={MAX_CODEBOOK}, got {k}"
                )));
            }
        }
        if !(self.mask_threshold > 0.0 && self.mask_threshold < 1.0) {
            return Err(Error::Config(format!(
                "mask_threshold must be in (0, 1), got {}",
                self.mask_threshold
            )));
        }
        Ok(())
    }
}

/// Size and structure report from one encode.
#[derive(Debug, Clone)]
pub struct EncodeStats {
    /// Gaussians in the input (and the bundle — encoding never drops rows).
    pub count: usize,
    /// Rows whose degree-3 band is masked off.
    pub masked_count: usize,
    /// Mean squared error of the degree-1/2 codebook fit.
    pub vq12_distortion: f64,
    /// Mean squared error of the degree-3 codebook fit.
    pub vq3_distortion: f64,
    /// Payload bytes per section, in directory order.
    pub section_bytes: Vec<(String, usize)>,
    /// Whole-file size including header, directory, and checksum.
    pub total_bytes: usize,
}

impl EncodeStats {
    /// Compressed bits per Gaussian; zero for an empty scene.
    pub fn bits_per_gaussian(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total_bytes as f64 * 8.0 / self.count as f64
        }
    }
}

/// The product of [`encode_bundle`]: the file bytes, the scene a
/// decoder will reconstruct from them, and size statistics.
#[derive(Debug, Clone)]
pub struct EncodedBundle {
    pub bytes: Vec<u8>,
    /// Exactly `decode_bundle(&bytes)` — the encoder previews itself
    /// through the real decoder rather than trusting its own state.
    pub preview: GaussianScene,
    pub stats: EncodeStats,
}

// ---- little-endian write/read helpers ----

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(out: &mut Vec<u8>, v: f32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], section: &'static str) -> Self {
        Reader { bytes, pos: 0, section }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::BundleFormat(format!(
                "{} section truncated: need {} bytes at offset {}, have {}",
                self.section,
                n,
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn finished(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::BundleFormat(format!(
                "{} section has {} trailing bytes",
                self.section,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

// ---- entropy-coded stream blobs ----

/// One self-describing stream: `u32 alphabet | freqs as u16 | u64 n |
/// u64 payload length | payload`. An empty stream stores alphabet 0.
fn encode_stream(symbols: &[u16], coder: CoderKind) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    if symbols.is_empty() {
        put_u32(&mut out, 0);
        put_u64(&mut out, 0);
        put_u64(&mut out, 0);
        return Ok(out);
    }
    let table = build_freq_table(symbols)?;
    put_u32(&mut out, table.alphabet_size() as u32);
    for &f in table.freqs() {
        put_u16(&mut out, f as u16);
    }
    let body = match coder {
        CoderKind::Rans => rans_encode(symbols, &table)?,
        CoderKind::Huffman => huffman_encode(symbols, &table)?,
        CoderKind::Arith => arith_encode(symbols, &table)?,
    };
    put_u64(&mut out, symbols.len() as u64);
    put_u64(&mut out, body.len() as u64);
    out.extend_from_slice(&body);
    Ok(out)
}

fn decode_stream(r: &mut Reader, coder: CoderKind) -> Result<Vec<u16>> {
    let alphabet = r.u32()? as usize;
    if alphabet == 0 {
        let n = r.u64()?;
        let len = r.u64()?;
        if n != 0 || len != 0 {
            return Err(Error::BundleFormat(format!(
                "empty-alphabet stream claims {n} symbols / {len} bytes"
            )));
        }
        return Ok(Vec::new());
    }
    let mut freqs = Vec::with_capacity(alphabet);
    for _ in 0..alphabet {
        freqs.push(r.u16()? as u32);
    }
    let table = FrequencyTable::from_freqs(freqs)?;
    let n = r.u64()? as usize;
    let len = r.u64()? as usize;
    let body = r.take(len)?;
    match coder {
        CoderKind::Rans => rans_decode(body, &table, n),
        CoderKind::Huffman => huffman_decode(body, &table, n),
        CoderKind::Arith => arith_decode(body, &table, n),
    }
}

/// Split quantized values into byte planes, low byte first.
fn split_planes(symbols: &[u16], bits: u8) -> Vec<Vec<u16>> {
    if bits <= 8 {
        vec![symbols.to_vec()]
    } else {
        let lo = symbols.iter().map(|&s| s & 0xff).collect();
        let hi = symbols.iter().map(|&s| s >> 8).collect();
        vec![lo, hi]
    }
}

fn merge_planes(planes: &[Vec<u16>]) -> Vec<u16> {
    match planes {
        [one] => one.clone(),
        [lo, hi] => lo.iter().zip(hi.iter()).map(|(&l, &h)| (h << 8) | l).collect(),
        _ => unreachable!("plane count is always 1 or 2"),
    }
}

/// Encode a whole quantized attribute array as its byte-plane streams.
fn encode_planes(symbols: &[u16], bits: u8, coder: CoderKind) -> Result<Vec<u8>> {
    let planes = split_planes(symbols, bits);
    let blobs: Vec<Vec<u8>> = planes
        .par_iter()
        .map(|p| encode_stream(p, coder))
        .collect::<Result<_>>()?;
    Ok(blobs.concat())
}

fn decode_planes(
    r: &mut Reader,
    bits: u8,
    expected: usize,
    coder: CoderKind,
) -> Result<Vec<u16>> {
    let count = if bits <= 8 { 1 } else { 2 };
    let mut planes = Vec::with_capacity(count);
    for _ in 0..count {
        let plane = decode_stream(r, coder)?;
        if plane.len() != expected {
            return Err(Error::BundleFormat(format!(
                "{} plane holds {} symbols, expected {expected}",
                r.section,
                plane.len()
            )));
        }
        planes.push(plane);
    }
    Ok(merge_planes(&planes))
}

// ---- mask bitmap ----

fn pack_bits(flags: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; flags.len().div_ceil(8)];
    for (i, &b) in flags.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

fn unpack_bits(bytes: &[u8], n: usize) -> Result<Vec<bool>> {
    if bytes.len() != n.div_ceil(8) {
        return Err(Error::BundleFormat(format!(
            "mask bitmap is {} bytes for {n} rows",
            bytes.len()
        )));
    }
    let mut flags = Vec::with_capacity(n);
    for i in 0..n {
        flags.push((bytes[i / 8] >> (i % 8)) & 1 == 1);
    }
    // Padding bits in the final byte must be zero.
    for i in n..bytes.len() * 8 {
        if (bytes[i / 8] >> (i % 8)) & 1 == 1 {
            return Err(Error::BundleFormat(
                "mask bitmap has nonzero padding bits".into(),
            ));
        }
    }
    Ok(flags)
}

// ---- codebook sections ----

fn empty_codebook(dim: usize) -> Codebook {
    Codebook {
        dim,
        centroids: Vec::new(),
        assignments: Vec::new(),
        distortion: 0.0,
    }
}

fn index_plane_count(k: usize) -> usize {
    if k <= 256 {
        1
    } else {
        2
    }
}

fn encode_vq_section(cb: &Codebook, coder: CoderKind) -> Result<Vec<u8>> {
    let k = cb.len();
    if k > MAX_CODEBOOK {
        return Err(Error::Config(format!(
            "codebook of {k} entries exceeds the 16-bit index limit"
        )));
    }
    let mut out = Vec::new();
    put_u32(&mut out, k as u32);
    put_u32(&mut out, cb.dim as u32);
    for &c in &cb.centroids {
        put_f32(&mut out, c as f32);
    }
    let idx: Vec<u16> = cb.assignments.iter().map(|&a| a as u16).collect();
    let lo: Vec<u16> = idx.iter().map(|&s| s & 0xff).collect();
    out.extend_from_slice(&encode_stream(&lo, coder)?);
    if index_plane_count(k) == 2 {
        let hi: Vec<u16> = idx.iter().map(|&s| s >> 8).collect();
        out.extend_from_slice(&encode_stream(&hi, coder)?);
    }
    Ok(out)
}

/// Returns `(centroids as f64, indices)`.
fn decode_vq_section(
    r: &mut Reader,
    expected_dim: usize,
    expected_rows: usize,
    coder: CoderKind,
) -> Result<(Vec<f64>, Vec<u32>)> {
    let k = r.u32()? as usize;
    let dim = r.u32()? as usize;
    if dim != expected_dim {
        return Err(Error::BundleFormat(format!(
            "{} codebook dimension {dim}, expected {expected_dim}",
            r.section
        )));
    }
    if k > MAX_CODEBOOK {
        return Err(Error::BundleFormat(format!(
            "{} codebook claims {k} entries",
            r.section
        )));
    }
    if k == 0 && expected_rows > 0 {
        return Err(Error::BundleFormat(format!(
            "{} has an empty codebook but {expected_rows} rows",
            r.section
        )));
    }
    let mut centroids = Vec::with_capacity(k * dim);
    for _ in 0..k * dim {
        centroids.push(r.f32()? as f64);
    }
    let lo = decode_stream(r, coder)?;
    let indices: Vec<u32> = if index_plane_count(k) == 2 {
        let hi = decode_stream(r, coder)?;
        if hi.len() != lo.len() {
            return Err(Error::BundleFormat(format!(
                "{} index planes disagree on length",
                r.section
            )));
        }
        lo.iter()
            .zip(hi.iter())
            .map(|(&l, &h)| ((h as u32) << 8) | l as u32)
            .collect()
    } else {
        lo.iter().map(|&l| l as u32).collect()
    };
    if indices.len() != expected_rows {
        return Err(Error::BundleFormat(format!(
            "{} holds {} indices, expected {expected_rows}",
            r.section,
            indices.len()
        )));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i as usize >= k) {
        return Err(Error::BundleFormat(format!(
            "{} index {bad} out of codebook range {k}",
            r.section
        )));
    }
    Ok((centroids, indices))
}

// ---- META ----

struct Meta {
    count: usize,
    max_sh_degree: u8,
    #[allow(dead_code)]
    aabb: ([f32; 3], [f32; 3]),
    grids: Vec<QuantGrid>,
    coder: CoderKind,
    #[allow(dead_code)]
    k12: u32,
    #[allow(dead_code)]
    k3: u32,
    #[allow(dead_code)]
    seed: u64,
}

#[allow(clippy::too_many_arguments)]
fn encode_meta(
    count: usize,
    max_sh_degree: u8,
    aabb: ([f64; 3], [f64; 3]),
    grids: &[&QuantGrid; 5],
    coder: CoderKind,
    k12: u32,
    k3: u32,
    seed: u64,
) -> Vec<u8> {
    let mut out = Vec::new();
    put_u32(&mut out, count as u32);
    out.push(max_sh_degree);
    for v in aabb.0.iter().chain(aabb.1.iter()) {
        put_f32(&mut out, *v as f32);
    }
    for g in grids {
        out.push(g.bits);
        for c in 0..g.channels() {
            put_f32(&mut out, g.channel_min[c] as f32);
            put_f32(&mut out, g.channel_max[c] as f32);
        }
    }
    out.push(coder.id());
    put_u32(&mut out, k12);
    put_u32(&mut out, k3);
    put_u64(&mut out, seed);
    out
}

fn decode_meta(bytes: &[u8]) -> Result<Meta> {
    let mut r = Reader::new(bytes, "META");
    let count = r.u32()? as usize;
    let max_sh_degree = r.u8()?;
    if max_sh_degree > 3 {
        return Err(Error::BundleFormat(format!(
            "SH degree {max_sh_degree} out of range"
        )));
    }
    let mut lo = [0f32; 3];
    let mut hi = [0f32; 3];
    for v in lo.iter_mut() {
        *v = r.f32()?;
    }
    for v in hi.iter_mut() {
        *v = r.f32()?;
    }
    let mut grids = Vec::with_capacity(5);
    for channels in GRID_CHANNELS {
        let bits = r.u8()?;
        if bits != 8 && bits != 16 {
            return Err(Error::BundleFormat(format!(
                "quantization grid claims {bits} bits"
            )));
        }
        let mut g = QuantGrid {
            bits,
            channel_min: Vec::with_capacity(channels),
            channel_max: Vec::with_capacity(channels),
        };
        for _ in 0..channels {
            g.channel_min.push(r.f32()? as f64);
            g.channel_max.push(r.f32()? as f64);
        }
        grids.push(g);
    }
    let coder = CoderKind::from_id(r.u8()?)?;
    let k12 = r.u32()?;
    let k3 = r.u32()?;
    let seed = r.u64()?;
    r.finished()?;
    Ok(Meta {
        count,
        max_sh_degree,
        aabb: (lo, hi),
        grids,
        coder,
        k12,
        k3,
        seed,
    })
}

// ---- rest-coefficient block gathers ----

/// Pull the pooled degree-1/2 block of every row: for each channel, the
/// first eight rest coefficients, channel-major.
fn gather_deg12(scene: &GaussianScene) -> Vec<f64> {
    let mut out = Vec::with_capacity(scene.count() * VQ12_DIM);
    for i in 0..scene.count() {
        let row = scene.sh_rest_row(i);
        for ch in 0..3 {
            let base = ch * SH_REST_PER_CHANNEL;
            out.extend_from_slice(&row[base..base + DEG12_PER_CHANNEL]);
        }
    }
    out
}

/// Pull the degree-3 block of the rows whose mask flag is set.
fn gather_deg3(scene: &GaussianScene, flags: &[bool]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..scene.count() {
        if !flags[i] {
            continue;
        }
        let row = scene.sh_rest_row(i);
        for ch in 0..3 {
            let base = ch * SH_REST_PER_CHANNEL + DEG12_PER_CHANNEL;
            out.extend_from_slice(&row[base..base + DEG3_PER_CHANNEL]);
        }
    }
    out
}

// ---- encode ----

/// Compress a scene into a self-contained bundle.
///
/// The pipeline is: validate, sort along the Morton curve, bake the
/// degree-3 mask, normalize rotations, fit per-channel quantization
/// grids and the two colour codebooks, entropy-code every stream, and
/// seal the file with a CRC. The returned preview scene is produced by
/// running the real decoder over the output bytes.
pub fn encode_bundle(scene: &GaussianScene, cfg: &CodecConfig) -> Result<EncodedBundle> {
    cfg.validate()?;
    let scene = scene.clone().validated()?;
    if scene.count() > u32::MAX as usize {
        return Err(Error::InvalidScene(format!(
            "{} Gaussians exceed the container's u32 row count",
            scene.count()
        )));
    }
    let (sorted, _) = morton_sort(&scene)?;
    let mut baked = bake_mask(&sorted, cfg.mask_threshold);
    let n = baked.count();
    for i in 0..n {
        let q = baked.normalized_rotation(i)?;
        baked.rotation_params[4 * i..4 * i + 4].copy_from_slice(&q);
    }
    let flags = mask_flags(&baked, cfg.mask_threshold);
    let masked_count = flags.iter().filter(|&&on| !on).count();

    let pos_grid = QuantGrid::fit(&baked.positions, 3, cfg.position_bits)?;
    let rot_grid = QuantGrid::fit(&baked.rotation_params, 4, cfg.scalar_bits)?;
    let scl_grid = QuantGrid::fit(&baked.log_scales, 3, cfg.scalar_bits)?;
    let opa_grid = QuantGrid::fit(&baked.opacity_logits, 1, cfg.scalar_bits)?;
    let dc_grid = QuantGrid::fit(&baked.sh_dc, 3, cfg.scalar_bits)?;

    let vec12 = gather_deg12(&baked);
    let vec3 = gather_deg3(&baked, &flags);
    let cb12 = if n == 0 {
        empty_codebook(VQ12_DIM)
    } else {
        fit_codebook(&vec12, VQ12_DIM, cfg.k12, cfg.seed)?
    };
    let cb3 = if vec3.is_empty() {
        empty_codebook(VQ3_DIM)
    } else {
        fit_codebook(&vec3, VQ3_DIM, cfg.k3, cfg.seed.wrapping_add(1))?
    };

    let meta = encode_meta(
        n,
        baked.max_sh_degree,
        baked.aabb(),
        &[&pos_grid, &rot_grid, &scl_grid, &opa_grid, &dc_grid],
        cfg.coder,
        cb12.len() as u32,
        cb3.len() as u32,
        cfg.seed,
    );

    // The five attribute sections are independent; code them in parallel.
    let quantized: Vec<(Vec<u16>, u8)> = vec![
        (pos_grid.quantize(&baked.positions)?, pos_grid.bits),
        (rot_grid.quantize(&baked.rotation_params)?, rot_grid.bits),
        (scl_grid.quantize(&baked.log_scales)?, scl_grid.bits),
        (opa_grid.quantize(&baked.opacity_logits)?, opa_grid.bits),
        (dc_grid.quantize(&baked.sh_dc)?, dc_grid.bits),
    ];
    let attr_sections: Vec<Vec<u8>> = quantized
        .par_iter()
        .map(|(symbols, bits)| encode_planes(symbols, *bits, cfg.coder))
        .collect::<Result<_>>()?;

    let mut payloads: Vec<Vec<u8>> = Vec::with_capacity(9);
    payloads.push(meta);
    payloads.extend(attr_sections);
    payloads.push(pack_bits(&flags));
    payloads.push(encode_vq_section(&cb12, cfg.coder)?);
    payloads.push(encode_vq_section(&cb3, cfg.coder)?);

    // Header, directory, payloads, checksum.
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&MAGIC);
    bytes.push(VERSION);
    put_u16(&mut bytes, SECTION_TAGS.len() as u16);
    let dir_start = bytes.len();
    let payload_start = dir_start + SECTION_TAGS.len() * 20;
    let mut offset = payload_start as u64;
    for (tag, payload) in SECTION_TAGS.iter().zip(payloads.iter()) {
        bytes.extend_from_slice(tag);
        put_u64(&mut bytes, offset);
        put_u64(&mut bytes, payload.len() as u64);
        offset += payload.len() as u64;
    }
    let mut section_bytes = Vec::with_capacity(9);
    for (tag, payload) in SECTION_TAGS.iter().zip(payloads.iter()) {
        section_bytes.push((
            String::from_utf8_lossy(tag).trim_end().to_string(),
            payload.len(),
        ));
        bytes.extend_from_slice(payload);
    }
    let crc = crc32(&bytes);
    put_u32(&mut bytes, crc);

    let preview = decode_bundle(&bytes)?;
    let stats = EncodeStats {
        count: n,
        masked_count,
        vq12_distortion: cb12.distortion,
        vq3_distortion: cb3.distortion,
        section_bytes,
        total_bytes: bytes.len(),
    };
    Ok(EncodedBundle {
        bytes,
        preview,
        stats,
    })
}

// ---- decode ----

/// Reconstruct a scene from bundle bytes. Pure: consults nothing but
/// the byte string.
pub fn decode_bundle(bytes: &[u8]) -> Result<GaussianScene> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(Error::BadVersion(bytes[4]));
    }
    if bytes.len() < 11 {
        return Err(Error::BundleFormat("file shorter than its header".into()));
    }
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let computed = crc32(&bytes[..bytes.len() - 4]);
    if stored != computed {
        return Err(Error::CrcMismatch { stored, computed });
    }

    let section_count = u16::from_le_bytes(bytes[5..7].try_into().unwrap()) as usize;
    if section_count != SECTION_TAGS.len() {
        return Err(Error::BundleFormat(format!(
            "expected {} sections, file declares {section_count}",
            SECTION_TAGS.len()
        )));
    }
    let dir_start = 7;
    let payload_start = dir_start + section_count * 20;
    let payload_end = bytes.len() - 4;
    if payload_start > payload_end {
        return Err(Error::BundleFormat("directory overruns the file".into()));
    }

    let mut sections: Vec<&[u8]> = Vec::with_capacity(section_count);
    for (s, tag) in SECTION_TAGS.iter().enumerate() {
        let e = dir_start + s * 20;
        if bytes[e..e + 4] != *tag {
            return Err(Error::BundleFormat(format!(
                "section {s} tagged {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[e..e + 4]),
                String::from_utf8_lossy(tag),
            )));
        }
        let off = u64::from_le_bytes(bytes[e + 4..e + 12].try_into().unwrap()) as usize;
        let len = u64::from_le_bytes(bytes[e + 12..e + 20].try_into().unwrap()) as usize;
        if off < payload_start || off.checked_add(len).map_or(true, |end| end > payload_end) {
            return Err(Error::BundleFormat(format!(
                "directory out of bounds: section {s} at {off}+{len}"
            )));
        }
        sections.push(&bytes[off..off + len]);
    }

    let meta = decode_meta(sections[0])?;
    let n = meta.count;
    let coder = meta.coder;

    let section_names: [&'static str; 5] = ["POSQ", "ROTQ", "SCLQ", "OPAQ", "SHDC"];
    let mut arrays: Vec<Vec<f64>> = Vec::with_capacity(5);
    for (s, name) in section_names.iter().enumerate() {
        let grid = &meta.grids[s];
        let expected = n * GRID_CHANNELS[s];
        let mut r = Reader::new(sections[1 + s], name);
        let symbols = decode_planes(&mut r, grid.bits, expected, coder)?;
        r.finished()?;
        arrays.push(grid.dequantize(&symbols)?);
    }

    let flags = unpack_bits(sections[6], n)?;
    let kept = flags.iter().filter(|&&on| on).count();

    let mut r12 = Reader::new(sections[7], "VQ12");
    let (cent12, idx12) = decode_vq_section(&mut r12, VQ12_DIM, n, coder)?;
    r12.finished()?;
    let mut r3 = Reader::new(sections[8], "VQ3");
    let (cent3, idx3) = decode_vq_section(&mut r3, VQ3_DIM, kept, coder)?;
    r3.finished()?;

    let mut sh_rest = vec![0.0f64; n * SH_REST_WIDTH];
    let mut mask_logits = vec![0.0f64; n];
    let mut next3 = 0usize;
    for i in 0..n {
        let row = &mut sh_rest[i * SH_REST_WIDTH..(i + 1) * SH_REST_WIDTH];
        let c12 = &cent12[idx12[i] as usize * VQ12_DIM..(idx12[i] as usize + 1) * VQ12_DIM];
        for ch in 0..3 {
            let base = ch * SH_REST_PER_CHANNEL;
            row[base..base + DEG12_PER_CHANNEL]
                .copy_from_slice(&c12[ch * DEG12_PER_CHANNEL..(ch + 1) * DEG12_PER_CHANNEL]);
        }
        if flags[i] {
            let c3 = &cent3[idx3[next3] as usize * VQ3_DIM..(idx3[next3] as usize + 1) * VQ3_DIM];
            next3 += 1;
            for ch in 0..3 {
                let base = ch * SH_REST_PER_CHANNEL + DEG12_PER_CHANNEL;
                row[base..base + DEG3_PER_CHANNEL]
                    .copy_from_slice(&c3[ch * DEG3_PER_CHANNEL..(ch + 1) * DEG3_PER_CHANNEL]);
            }
            mask_logits[i] = 8.0;
        } else {
            mask_logits[i] = -8.0;
        }
    }

    let mut arrays = arrays.into_iter();
    let scene = GaussianScene {
        positions: arrays.next().unwrap(),
        rotation_params: arrays.next().unwrap(),
        log_scales: arrays.next().unwrap(),
        opacity_logits: arrays.next().unwrap(),
        sh_dc: arrays.next().unwrap(),
        sh_rest,
        mask_logits,
        max_sh_degree: meta.max_sh_degree,
    };
    scene.validated()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;
    use crate::render::{render, RenderOptions};
    use crate::testkit;

    fn demo_scene(n: usize, seed: u64) -> GaussianScene {
        let mut s = testkit::random_scene(n, 3, seed);
        // Mix of kept and masked degree-3 bands.
        for i in 0..n {
            if i % 3 == 0 {
                s.mask_logits[i] = -4.0;
            }
        }
        s
    }

    #[test]
    fn roundtrip_structure() {
        let scene = demo_scene(50, 8);
        let enc = encode_bundle(&scene, &CodecConfig::default()).unwrap();
        assert_eq!(&enc.bytes[..4], b"SPWZ");
        assert_eq!(enc.bytes[4], 1);
        let dec = decode_bundle(&enc.bytes).unwrap();
        assert_eq!(dec, enc.preview);
        assert_eq!(dec.count(), 50);
        assert_eq!(dec.max_sh_degree, 3);

        // Masked rows: zero degree-3, logit -8; kept rows: logit +8.
        let mut masked_seen = 0;
        for i in 0..dec.count() {
            let row = dec.sh_rest_row(i);
            if dec.mask_logits[i] == -8.0 {
                masked_seen += 1;
                for ch in 0..3 {
                    let base = ch * SH_REST_PER_CHANNEL + DEG12_PER_CHANNEL;
                    assert!(row[base..base + DEG3_PER_CHANNEL]
                        .iter()
                        .all(|&v| v == 0.0));
                }
            } else {
                assert_eq!(dec.mask_logits[i], 8.0);
            }
        }
        assert_eq!(masked_seen, enc.stats.masked_count);
        assert!(masked_seen > 0);
    }

    #[test]
    fn encode_is_deterministic() {
        let scene = demo_scene(30, 9);
        let a = encode_bundle(&scene, &CodecConfig::default()).unwrap();
        let b = encode_bundle(&scene, &CodecConfig::default()).unwrap();
        assert_eq!(a.bytes, b.bytes);
        let da = decode_bundle(&a.bytes).unwrap();
        let db = decode_bundle(&a.bytes).unwrap();
        assert_eq!(da, db);
    }

    #[test]
    fn empty_scene_roundtrips() {
        let scene = GaussianScene::empty(2);
        let enc = encode_bundle(&scene, &CodecConfig::default()).unwrap();
        assert_eq!(&enc.bytes[..4], b"SPWZ");
        let dec = decode_bundle(&enc.bytes).unwrap();
        assert_eq!(dec.count(), 0);
        assert_eq!(dec.max_sh_degree, 2);
        assert_eq!(enc.stats.bits_per_gaussian(), 0.0);
    }

    #[test]
    fn all_coders_reconstruct_the_same_scene() {
        let scene = demo_scene(40, 10);
        let mut decoded = Vec::new();
        for coder in [CoderKind::Rans, CoderKind::Huffman, CoderKind::Arith] {
            let cfg = CodecConfig { coder, ..CodecConfig::default() };
            let enc = encode_bundle(&scene, &cfg).unwrap();
            decoded.push(decode_bundle(&enc.bytes).unwrap());
        }
        assert_eq!(decoded[0], decoded[1]);
        assert_eq!(decoded[0], decoded[2]);
    }

    #[test]
    fn near_lossless_at_full_depth() {
        let scene = testkit::random_scene(80, 3, 12);
        let cfg = CodecConfig {
            position_bits: 16,
            scalar_bits: 16,
            k12: 80,
            k3: 80,
            ..CodecConfig::default()
        };
        let enc = encode_bundle(&scene, &cfg).unwrap();
        assert_eq!(enc.stats.vq12_distortion, 0.0);
        let dec = decode_bundle(&enc.bytes).unwrap();
        let cams = testkit::ring_cameras(2, [0.0, 0.0, 0.0], 6.0, 64, 64);
        for cam in &cams {
            let a = render(&scene, cam, &RenderOptions::default()).unwrap();
            let b = render(&dec, cam, &RenderOptions::default()).unwrap();
            let db = psnr(&a.color, &b.color).unwrap();
            assert!(db >= 45.0, "psnr {db}");
        }
    }

    #[test]
    fn corruption_is_detected() {
        let scene = demo_scene(20, 13);
        let enc = encode_bundle(&scene, &CodecConfig::default()).unwrap();

        // Any flipped payload byte fails the checksum.
        let mut bad = enc.bytes.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 0x40;
        assert!(matches!(
            decode_bundle(&bad),
            Err(Error::CrcMismatch { .. })
        ));

        // Broken magic and unsupported version are named errors.
        let mut bad = enc.bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_bundle(&bad), Err(Error::BadMagic)));
        let mut bad = enc.bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode_bundle(&bad), Err(Error::BadVersion(9))));

        // Truncation cannot pass the checksum either.
        let bad = &enc.bytes[..enc.bytes.len() - 7];
        assert!(decode_bundle(bad).is_err());
    }

    #[test]
    fn directory_bounds_are_enforced() {
        let scene = demo_scene(10, 14);
        let enc = encode_bundle(&scene, &CodecConfig::default()).unwrap();
        // Point the second section far past the end of the file, then
        // re-seal the checksum so only the directory check can object.
        let mut bad = enc.bytes.clone();
        let entry = 7 + 20 + 4; // second directory slot's offset field
        bad[entry..entry + 8].copy_from_slice(&(1u64 << 40).to_le_bytes());
        let crc = crc32(&bad[..bad.len() - 4]);
        let end = bad.len();
        bad[end - 4..].copy_from_slice(&crc.to_le_bytes());
        match decode_bundle(&bad) {
            Err(Error::BundleFormat(msg)) => {
                assert!(msg.contains("out of bounds"), "{msg}")
            }
            other => panic!("expected a format error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_coder_id_is_reported() {
        let scene = demo_scene(10, 15);
        let enc = encode_bundle(&scene, &CodecConfig::default()).unwrap();
        // META's coder id byte sits after count, degree, AABB, and the
        // five grids.
        let meta_off = 7 + 9 * 20;
        let grids_len: usize = GRID_CHANNELS.iter().map(|c| 1 + 8 * c).sum();
        let coder_pos = meta_off + 4 + 1 + 24 + grids_len;
        let mut bad = enc.bytes.clone();
        assert_eq!(bad[coder_pos], CoderKind::Rans.id());
        bad[coder_pos] = 7;
        let crc = crc32(&bad[..bad.len() - 4]);
        let end = bad.len();
        bad[end - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode_bundle(&bad), Err(Error::UnknownCoder(7))));
    }

    #[test]
    fn preview_matches_decode_exactly() {
        let scene = demo_scene(25, 16);
        let enc = encode_bundle(&scene, &CodecConfig::default()).unwrap();
        let dec = decode_bundle(&enc.bytes).unwrap();
        assert_eq!(enc.preview, dec);
    }

    #[test]
    fn config_validation() {
        let scene = demo_scene(5, 17);
        for cfg in [
            CodecConfig { position_bits: 12, ..CodecConfig::default() },
            CodecConfig { scalar_bits: 0, ..CodecConfig::default() },
            CodecConfig { k12: 0, ..CodecConfig::default() },
            CodecConfig { k3: MAX_CODEBOOK + 1, ..CodecConfig::default() },
            CodecConfig { mask_threshold: 1.5, ..CodecConfig::default() },
        ] {
            assert!(encode_bundle(&scene, &cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn row_order_of_input_does_not_change_the_bytes() {
        // Encoding sorts along the Morton curve first, so a shuffled
        // copy of the same scene produces the identical file.
        let scene = demo_scene(30, 18);
        let mut shuffled_idx: Vec<usize> = (0..30).collect();
        shuffled_idx.reverse();
        let shuffled = crate::prune::reorder(&scene, &shuffled_idx).unwrap();
        let a = encode_bundle(&scene, &CodecConfig::default()).unwrap();
        let b = encode_bundle(&shuffled, &CodecConfig::default()).unwrap();
        assert_eq!(a.bytes, b.bytes);
    }
}
