//! Golden-value regression fixtures over the checked-in corpus.
//!
//! The corpus lives in `fixtures/` at the workspace root: two tiny
//! hand-written PLY files, one camera list, and one golden bundle together
//! with the config that produced it. `manifest.txt` pins a SHA-256 for every
//! input plus the hash of the image the golden bundle must render to.
//! Verification is hermetic — it re-runs each fixture command against the
//! committed bytes and nothing else.
//!
//! Regenerate the whole corpus (after an intentional format change) with:
//!
//! ```text
//! cargo test -p spwz-core regenerate_fixture_corpus -- --ignored
//! ```
//!
//! then review the diff; a byte change in `golden.spwz` means the bundle
//! format changed and `docs/FORMAT.md` must be updated to match.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::codec::{decode_bundle, encode_bundle, CodecConfig, CoderKind};
use crate::error::{Error, Result};
use crate::io::{
    generate_synthetic, ply_bytes, read_cameras, read_ply, write_cameras, SyntheticSceneSpec,
};
use crate::render::{render, RenderOptions};
use crate::scene::{GaussianScene, DEFAULT_MASK_LOGIT, SH_REST_WIDTH};

/// Every file the corpus consists of, in regeneration order.
pub const CORPUS_FILES: [&str; 6] = [
    "single.ply",
    "triple.ply",
    "ring.cams",
    "golden.spwz",
    "golden.config.txt",
    "manifest.txt",
];

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// One pinned regression check from the manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenFixture {
    pub id: String,
    pub command: FixtureCommand,
}

/// What a fixture re-runs and what it compares against. Paths are relative
/// to the corpus directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixtureCommand {
    /// Hash the PLY file, parse it, re-serialize, and require the bytes that
    /// come back out to equal the bytes on disk.
    PlyRoundtrip { input: String, input_sha256: String },
    /// Hash the bundle, decode it (which checks its CRC), render the first
    /// committed camera, and require the PPM hash to match.
    BundleRender {
        input: String,
        input_sha256: String,
        cameras: String,
        render_sha256: String,
    },
}

/// Result of re-running one fixture.
#[derive(Debug, Clone)]
pub struct FixtureOutcome {
    pub id: String,
    pub passed: bool,
    /// "ok" on success; on failure, what differed.
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct FixtureReport {
    pub outcomes: Vec<FixtureOutcome>,
}

impl FixtureReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FixtureOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

fn checked_hash(field: &str, id: &str) -> Result<String> {
    if field.len() == 64 && field.bytes().all(|b| b.is_ascii_hexdigit()) {
        Ok(field.to_ascii_lowercase())
    } else {
        Err(Error::Fixture(format!(
            "fixture {id}: {field:?} is not a hex sha-256"
        )))
    }
}

/// Parse manifest text. One fixture per line, whitespace-separated fields,
/// `#` comments and blank lines skipped:
///
/// ```text
/// <id> ply_roundtrip <file> <sha256(file)>
/// <id> bundle_render <bundle> <sha256(bundle)> <cameras> <sha256(ppm)>
/// ```
pub fn parse_manifest(text: &str) -> Result<Vec<GoldenFixture>> {
    let mut fixtures: Vec<GoldenFixture> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| {
            Error::Fixture(format!("manifest line {}: {msg}: {line:?}", lineno + 1))
        };
        if fields.len() < 2 {
            return Err(bad("expected `<id> <kind> <args...>`"));
        }
        let id = fields[0].to_string();
        if fixtures.iter().any(|f| f.id == id) {
            return Err(bad("duplicate fixture id"));
        }
        let command = match (fields[1], fields.len()) {
            ("ply_roundtrip", 4) => FixtureCommand::PlyRoundtrip {
                input: fields[2].to_string(),
                input_sha256: checked_hash(fields[3], &id)?,
            },
            ("bundle_render", 6) => FixtureCommand::BundleRender {
                input: fields[2].to_string(),
                input_sha256: checked_hash(fields[3], &id)?,
                cameras: fields[4].to_string(),
                render_sha256: checked_hash(fields[5], &id)?,
            },
            ("ply_roundtrip", _) => return Err(bad("ply_roundtrip takes <file> <sha256>")),
            ("bundle_render", _) => {
                return Err(bad("bundle_render takes <bundle> <sha256> <cameras> <sha256>"))
            }
            (kind, _) => return Err(bad(&format!("unknown fixture kind {kind:?}"))),
        };
        fixtures.push(GoldenFixture { id, command });
    }
    if fixtures.is_empty() {
        return Err(Error::Fixture("manifest lists no fixtures".into()));
    }
    Ok(fixtures)
}

/// Re-run every fixture listed in `<corpus>/manifest.txt`.
///
/// A missing or malformed manifest is an error; a fixture whose check fails
/// (hash drift, decode error, render drift) is reported as a failed outcome
/// whose detail says what differed.
pub fn verify_fixtures(corpus: &Path) -> Result<FixtureReport> {
    let manifest_path = corpus.join("manifest.txt");
    let text = fs::read_to_string(&manifest_path).map_err(|e| {
        Error::Fixture(format!("cannot read {}: {e}", manifest_path.display()))
    })?;
    let fixtures = parse_manifest(&text)?;
    let outcomes = fixtures
        .iter()
        .map(|f| {
            let (passed, detail) = match run_fixture(corpus, f) {
                Ok(()) => (true, "ok".to_string()),
                Err(msg) => (false, msg),
            };
            FixtureOutcome {
                id: f.id.clone(),
                passed,
                detail,
            }
        })
        .collect();
    Ok(FixtureReport { outcomes })
}

fn read_checked(corpus: &Path, rel: &str, want: &str) -> std::result::Result<Vec<u8>, String> {
    let path = corpus.join(rel);
    let bytes = fs::read(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let got = sha256_hex(&bytes);
    if got != want {
        return Err(format!("{rel}: sha-256 {got} does not match manifest {want}"));
    }
    Ok(bytes)
}

fn run_fixture(corpus: &Path, fixture: &GoldenFixture) -> std::result::Result<(), String> {
    match &fixture.command {
        FixtureCommand::PlyRoundtrip {
            input,
            input_sha256,
        } => {
            let bytes = read_checked(corpus, input, input_sha256)?;
            let scene = read_ply(&corpus.join(input)).map_err(|e| format!("{input}: {e}"))?;
            let back = ply_bytes(&scene).map_err(|e| format!("{input}: {e}"))?;
            if back != bytes {
                return Err(format!(
                    "{input}: re-serialized PLY differs from committed bytes ({} vs {} bytes)",
                    back.len(),
                    bytes.len()
                ));
            }
            Ok(())
        }
        FixtureCommand::BundleRender {
            input,
            input_sha256,
            cameras,
            render_sha256,
        } => {
            let bytes = read_checked(corpus, input, input_sha256)?;
            let scene = decode_bundle(&bytes).map_err(|e| format!("{input}: decode: {e}"))?;
            let cams = read_cameras(&corpus.join(cameras))
                .map_err(|e| format!("{cameras}: {e}"))?;
            let cam = cams
                .first()
                .ok_or_else(|| format!("{cameras}: camera list is empty"))?;
            let out = render(&scene, cam, &RenderOptions::default())
                .map_err(|e| format!("{input}: render: {e}"))?;
            let got = sha256_hex(&out.color.to_ppm());
            if got != *render_sha256 {
                return Err(format!(
                    "{input}: rendered image sha-256 {got} does not match manifest {render_sha256}"
                ));
            }
            Ok(())
        }
    }
}

/// `fixtures/` at the workspace root, resolved from this crate's location.
pub fn default_corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// A tiny scene with explicit, auditable values. Everything is an exact
/// binary fraction, so the f32 PLY roundtrip is bitwise.
fn hand_scene(count: usize) -> GaussianScene {
    let mut s = GaussianScene::empty(3);
    for i in 0..count {
        let k = i as f64;
        s.positions
            .extend([0.25 * k - 0.25, 0.125 * k, 0.5 - 0.125 * k]);
        s.rotation_params.extend(match i % 3 {
            0 => [1.0, 0.0, 0.0, 0.0],
            1 => [0.75, 0.25, 0.0, 0.0],
            _ => [0.5, 0.5, 0.5, 0.5],
        });
        s.log_scales.extend([-2.25, -2.0 - 0.25 * k, -2.5]);
        s.opacity_logits.push(0.5 + 0.25 * k);
        s.sh_dc.extend([0.5, 0.25 - 0.125 * k, -0.125]);
        for j in 0..SH_REST_WIDTH {
            s.sh_rest
                .push(((i * SH_REST_WIDTH + j) % 9) as f64 * 0.03125 - 0.125);
        }
        s.mask_logits.push(DEFAULT_MASK_LOGIT);
    }
    s
}

fn golden_scene_spec() -> SyntheticSceneSpec {
    SyntheticSceneSpec {
        count: 24,
        max_sh_degree: 3,
        n_cameras: 3,
        image_width: 48,
        image_height: 48,
        seed: 7,
        ..SyntheticSceneSpec::default()
    }
}

fn golden_codec_config() -> CodecConfig {
    CodecConfig {
        k12: 16,
        k3: 16,
        coder: CoderKind::Rans,
        seed: 11,
        ..CodecConfig::default()
    }
}

/// Rebuild every corpus file in `dir`, manifest included.
///
/// The procedure is fully deterministic, so running it twice produces
/// byte-identical files; `regeneration_matches_committed_corpus` holds the
/// committed corpus to that.
pub fn regenerate_corpus(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Fixture(format!("cannot create {}: {e}", dir.display())))?;
    let write = |rel: &str, bytes: &[u8]| -> Result<()> {
        fs::write(dir.join(rel), bytes)
            .map_err(|e| Error::Fixture(format!("cannot write {rel}: {e}")))
    };

    let single = ply_bytes(&hand_scene(1))?;
    write("single.ply", &single)?;
    let triple = ply_bytes(&hand_scene(3))?;
    write("triple.ply", &triple)?;

    let spec = golden_scene_spec();
    let (scene, cams) = generate_synthetic(&spec)?;
    write_cameras(&cams, &dir.join("ring.cams"))?;
    // Hash against the cameras as they read back: the text format snaps
    // rotations on load, and verification sees only the snapped pose.
    let cams = read_cameras(&dir.join("ring.cams"))?;

    let cfg = golden_codec_config();
    let bundle = encode_bundle(&scene, &cfg)?;
    write("golden.spwz", &bundle.bytes)?;

    let decoded = decode_bundle(&bundle.bytes)?;
    let out = render(&decoded, &cams[0], &RenderOptions::default())?;
    let render_hash = sha256_hex(&out.color.to_ppm());

    let config_text = format!(
        "# Parameters that regenerate golden.spwz. The whole corpus is rebuilt by\n\
         #   cargo test -p spwz-core regenerate_fixture_corpus -- --ignored\n\
         scene = synthetic\n\
         count = {}\n\
         max_sh_degree = {}\n\
         scene_seed = {}\n\
         cameras = {}\n\
         image = {}x{}\n\
         position_bits = {}\n\
         scalar_bits = {}\n\
         k12 = {}\n\
         k3 = {}\n\
         coder = {}\n\
         codec_seed = {}\n",
        spec.count,
        spec.max_sh_degree,
        spec.seed,
        spec.n_cameras,
        spec.image_width,
        spec.image_height,
        cfg.position_bits,
        cfg.scalar_bits,
        cfg.k12,
        cfg.k3,
        cfg.coder.name(),
        cfg.seed,
    );
    write("golden.config.txt", config_text.as_bytes())?;

    let manifest = format!(
        "# fixture manifest: <id> <kind> <args...>\n\
         #   ply_roundtrip <file> <sha256(file)>\n\
         #   bundle_render <bundle> <sha256(bundle)> <cameras> <sha256(rendered ppm)>\n\
         single-ply ply_roundtrip single.ply {}\n\
         triple-ply ply_roundtrip triple.ply {}\n\
         golden-bundle bundle_render golden.spwz {} ring.cams {}\n",
        sha256_hex(&single),
        sha256_hex(&triple),
        sha256_hex(&bundle.bytes),
        render_hash,
    );
    write("manifest.txt", manifest.as_bytes())
}
