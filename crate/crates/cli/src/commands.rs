//! One function per subcommand. Every error is prefixed with the name of
//! the pipeline stage that failed, so a broken run points at itself.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use spwz_core::codec::{decode_bundle, encode_bundle, EncodedBundle};
use spwz_core::finetune::{masked_fraction, progress_csv, run_distill_finetune};
use spwz_core::importance::{rank_bottom, score_hessian, score_opacity, scores_csv, ImportanceScores};
use spwz_core::io::{generate_synthetic, read_cameras, read_ply, write_cameras, write_ply, SyntheticSceneSpec};
use spwz_core::metrics::{chamfer, psnr, ssim};
use spwz_core::prune::{bake_mask, prune};
use spwz_core::render::{render, RenderOptions};
use spwz_core::{Camera, GaussianScene, ImageRgb};

use crate::config::{RunConfig, ScoreChoice};

/// Prefix an error with the stage it came from.
fn stage<E: std::fmt::Display>(name: &'static str) -> impl FnOnce(E) -> String {
    move |e| format!("{name}: {e}")
}

/// Render options for plain color output (no depth buffer).
fn color_opts() -> RenderOptions<'static> {
    RenderOptions {
        want_depth: false,
        ..RenderOptions::default()
    }
}

fn render_color(scene: &GaussianScene, camera: &Camera) -> spwz_core::Result<ImageRgb> {
    render(scene, camera, &color_opts()).map(|out| out.color)
}

/// Peak resident set size in kB, if the platform reports one.
fn peak_rss_kb() -> Option<u64> {
    let text = fs::read_to_string("/proc/self/status").ok()?;
    let line = text.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn compute_scores(
    scene: &GaussianScene,
    cameras: &[Camera],
    cfg: &RunConfig,
) -> spwz_core::Result<ImportanceScores> {
    match cfg.score {
        ScoreChoice::Hessian => score_hessian(scene, cameras),
        ScoreChoice::Opacity => score_opacity(scene, cameras, cfg.volume_beta),
    }
}

/// The full compression pipeline behind `compress` and each `bench` point:
/// score, drop the weakest fraction, fine-tune the survivors against the
/// original scene, encode. Returns the fine-tuned scene and the bundle.
fn compress_pipeline(
    scene: &GaussianScene,
    cameras: &[Camera],
    cfg: &RunConfig,
) -> Result<(GaussianScene, EncodedBundle), String> {
    let scores = compute_scores(scene, cameras, cfg).map_err(stage("score"))?;
    let drop = rank_bottom(&scores.scores, cfg.prune_fraction).map_err(stage("rank"))?;
    let pruned = prune(scene, &drop).map_err(stage("prune"))?;
    // An empty student has nothing to distill or mask; the codec still
    // produces a valid (header-only) bundle for it.
    let tuned = if pruned.count() == 0 {
        pruned
    } else {
        run_distill_finetune(&pruned, scene, cameras, &cfg.finetune())
            .map_err(stage("finetune"))?
            .0
    };
    let bundle = encode_bundle(&tuned, &cfg.codec()).map_err(stage("encode"))?;
    Ok((tuned, bundle))
}

/// Write CSV text to `--out` if given, else to stdout. Only the file path
/// confirmation goes to stdout when writing a file, so piped output stays
/// machine-readable either way.
fn emit_text(text: &str, out: Option<&Path>, what: &'static str) -> Result<(), String> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(stage(what))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `gen`: synthesize a scene, save it as PLY + camera list, and render
/// ground-truth views. Deterministic for a given seed and config.
pub fn cmd_gen(cfg: &RunConfig, out_dir: &Path) -> Result<(), String> {
    let spec = SyntheticSceneSpec {
        count: cfg.gen_count,
        max_sh_degree: cfg.gen_degree,
        n_cameras: cfg.gen_cameras,
        image_width: cfg.gen_width,
        image_height: cfg.gen_height,
        seed: cfg.seed,
        ..SyntheticSceneSpec::default()
    };
    let (scene, cameras) = generate_synthetic(&spec).map_err(stage("generate"))?;
    fs::create_dir_all(out_dir).map_err(stage("create output directory"))?;
    let ply_path = out_dir.join("scene.ply");
    write_ply(&scene, &ply_path).map_err(stage("write scene"))?;
    let cam_path = out_dir.join("cameras.txt");
    write_cameras(&cameras, &cam_path).map_err(stage("write cameras"))?;
    // Render from the cameras as re-read from disk, so the saved text file
    // and the saved images agree exactly (reading snaps the rotation back
    // to orthonormal).
    let cameras = read_cameras(&cam_path).map_err(stage("reload cameras"))?;
    for (i, cam) in cameras.iter().enumerate() {
        let img = render_color(&scene, cam).map_err(stage("render"))?;
        let view_path = out_dir.join(format!("view_{i:03}.ppm"));
        fs::write(&view_path, img.to_ppm()).map_err(stage("write view"))?;
    }
    println!("gaussians: {}", scene.count());
    println!("sh degree: {}", scene.max_sh_degree);
    println!("views: {}", cameras.len());
    println!("wrote {}", ply_path.display());
    println!("wrote {}", cam_path.display());
    Ok(())
}

/// `compress`: score, prune, fine-tune, encode; write the bundle.
pub fn cmd_compress(
    cfg: &RunConfig,
    input: &Path,
    cameras: &Path,
    out: &Path,
) -> Result<(), String> {
    let scene = read_ply(input).map_err(stage("read scene"))?;
    let cameras = read_cameras(cameras).map_err(stage("read cameras"))?;
    let n_before = scene.count();
    let (tuned, bundle) = compress_pipeline(&scene, &cameras, cfg)?;
    fs::write(out, &bundle.bytes).map_err(stage("write bundle"))?;
    println!("gaussians: {} -> {}", n_before, tuned.count());
    println!(
        "masked fraction: {:.4}",
        masked_fraction(&tuned, cfg.mask_threshold)
    );
    println!("bundle bytes: {}", bundle.bytes.len());
    println!("bits per gaussian: {:.2}", bundle.stats.bits_per_gaussian());
    println!("wrote {}", out.display());
    Ok(())
}

/// `decompress`: decode a bundle (checksum verified inside) back to PLY.
pub fn cmd_decompress(input: &Path, out: &Path) -> Result<(), String> {
    let bytes = fs::read(input).map_err(stage("read bundle"))?;
    let scene = decode_bundle(&bytes).map_err(stage("decode"))?;
    write_ply(&scene, out).map_err(stage("write scene"))?;
    println!("gaussians: {}", scene.count());
    println!("crc: ok");
    println!("wrote {}", out.display());
    Ok(())
}

/// `eval`: render both scenes under shared cameras; per-view PSNR/SSIM rows
/// plus chamfer, counts, mean render time, and peak memory summary lines.
pub fn cmd_eval(
    reference: &Path,
    candidate: &Path,
    cameras: &Path,
    out: Option<&Path>,
) -> Result<(), String> {
    let ref_scene = read_ply(reference).map_err(stage("read reference"))?;
    let cand_scene = read_ply(candidate).map_err(stage("read candidate"))?;
    let cameras = read_cameras(cameras).map_err(stage("read cameras"))?;
    let mut csv = String::from("view,psnr,ssim\n");
    let mut candidate_ms = 0.0;
    for (i, cam) in cameras.iter().enumerate() {
        let ref_img = render_color(&ref_scene, cam).map_err(stage("render reference"))?;
        let t0 = Instant::now();
        let cand_img = render_color(&cand_scene, cam).map_err(stage("render candidate"))?;
        candidate_ms += t0.elapsed().as_secs_f64() * 1e3;
        let p = psnr(&ref_img, &cand_img).map_err(stage("psnr"))?;
        let s = ssim(&ref_img, &cand_img).map_err(stage("ssim"))?;
        let _ = writeln!(csv, "{i},{p},{s}");
    }
    let ch = chamfer(&ref_scene.positions, &cand_scene.positions).map_err(stage("chamfer"))?;
    let _ = writeln!(csv, "chamfer,{ch}");
    let _ = writeln!(csv, "count_reference,{}", ref_scene.count());
    let _ = writeln!(csv, "count_candidate,{}", cand_scene.count());
    let _ = writeln!(
        csv,
        "mean_render_ms,{:.3}",
        candidate_ms / cameras.len().max(1) as f64
    );
    match peak_rss_kb() {
        Some(kb) => {
            let _ = writeln!(csv, "peak_rss_kb,{kb}");
        }
        None => {
            let _ = writeln!(csv, "peak_rss_kb,");
        }
    }
    emit_text(&csv, out, "write report")
}

/// Frames per second over at least five warm renders cycling the views.
fn measure_fps(scene: &GaussianScene, cameras: &[Camera]) -> Result<f64, String> {
    if cameras.is_empty() {
        return Ok(0.0);
    }
    render_color(scene, &cameras[0]).map_err(stage("fps warmup"))?;
    let runs = cameras.len().max(5);
    let t0 = Instant::now();
    for k in 0..runs {
        render_color(scene, &cameras[k % cameras.len()]).map_err(stage("fps render"))?;
    }
    Ok(runs as f64 / t0.elapsed().as_secs_f64())
}

/// `bench`: run the compression pipeline for every (K, bits, prune) point
/// in the configured sweep and report one CSV row per point. Everything
/// except the fps column is deterministic for a given seed and config.
pub fn cmd_bench(
    cfg: &RunConfig,
    input: &Path,
    cameras: &Path,
    out: Option<&Path>,
) -> Result<(), String> {
    let scene = read_ply(input).map_err(stage("read scene"))?;
    let cameras = read_cameras(cameras).map_err(stage("read cameras"))?;
    let mut truth = Vec::with_capacity(cameras.len());
    for cam in &cameras {
        truth.push(render_color(&scene, cam).map_err(stage("render reference"))?);
    }
    let mut csv = String::from("config,bytes,bpp_per_gaussian,N,psnr,ssim,chamfer,fps\n");
    for &k in &cfg.bench_k {
        for &bits in &cfg.bench_bits {
            for &pf in &cfg.bench_prune {
                let mut point = cfg.clone();
                point.k12 = k;
                point.k3 = k;
                point.scalar_bits = bits;
                point.prune_fraction = pf;
                let label = format!("k{k}_b{bits}_p{pf}");
                let row = bench_point(&scene, &cameras, &truth, &point, &label)
                    .map_err(|e| format!("bench point {label}: {e}"))?;
                csv.push_str(&row);
            }
        }
    }
    emit_text(&csv, out, "write report")
}

/// One sweep point: compress, decode, measure, and format a CSV row.
fn bench_point(
    scene: &GaussianScene,
    cameras: &[Camera],
    truth: &[ImageRgb],
    point: &RunConfig,
    label: &str,
) -> Result<String, String> {
    let (_tuned, bundle) = compress_pipeline(scene, cameras, point)?;
    let decoded = decode_bundle(&bundle.bytes).map_err(stage("decode"))?;
    let mut mean_psnr = 0.0;
    let mut mean_ssim = 0.0;
    for (cam, truth_img) in cameras.iter().zip(truth) {
        let img = render_color(&decoded, cam).map_err(stage("render"))?;
        mean_psnr += psnr(truth_img, &img).map_err(stage("psnr"))?;
        mean_ssim += ssim(truth_img, &img).map_err(stage("ssim"))?;
    }
    let views = cameras.len().max(1) as f64;
    let ch = chamfer(&scene.positions, &decoded.positions).map_err(stage("chamfer"))?;
    let fps = measure_fps(&decoded, cameras)?;
    Ok(format!(
        "{label},{},{},{},{},{},{},{:.2}\n",
        bundle.bytes.len(),
        bundle.stats.bits_per_gaussian(),
        decoded.count(),
        mean_psnr / views,
        mean_ssim / views,
        ch,
        fps
    ))
}

/// `score`: per-Gaussian importance as `index,score` CSV.
pub fn cmd_score(
    cfg: &RunConfig,
    input: &Path,
    cameras: &Path,
    out: Option<&Path>,
) -> Result<(), String> {
    let scene = read_ply(input).map_err(stage("read scene"))?;
    let cameras = read_cameras(cameras).map_err(stage("read cameras"))?;
    let scores = compute_scores(&scene, &cameras, cfg).map_err(stage("score"))?;
    emit_text(&scores_csv(&scores), out, "write scores")
}

/// `prune`: drop the lowest-scoring fraction and write the survivors.
pub fn cmd_prune(cfg: &RunConfig, input: &Path, cameras: &Path, out: &Path) -> Result<(), String> {
    let scene = read_ply(input).map_err(stage("read scene"))?;
    let cameras = read_cameras(cameras).map_err(stage("read cameras"))?;
    let scores = compute_scores(&scene, &cameras, cfg).map_err(stage("score"))?;
    let drop = rank_bottom(&scores.scores, cfg.prune_fraction).map_err(stage("rank"))?;
    let pruned = prune(&scene, &drop).map_err(stage("prune"))?;
    write_ply(&pruned, out).map_err(stage("write scene"))?;
    println!("gaussians: {} -> {}", scene.count(), pruned.count());
    println!("wrote {}", out.display());
    Ok(())
}

/// `finetune`: distill a student scene against a teacher. The fine-tuned
/// scene goes to `--out`; the progress CSV goes to `--progress` or stdout.
pub fn cmd_finetune(
    cfg: &RunConfig,
    student: &Path,
    teacher: &Path,
    cameras: &Path,
    out: &Path,
    progress: Option<&Path>,
) -> Result<(), String> {
    let student = read_ply(student).map_err(stage("read student"))?;
    let teacher = read_ply(teacher).map_err(stage("read teacher"))?;
    let cameras = read_cameras(cameras).map_err(stage("read cameras"))?;
    let (tuned, rows) = run_distill_finetune(&student, &teacher, &cameras, &cfg.finetune())
        .map_err(stage("finetune"))?;
    // PLY carries no gate state, so persist the decision in the data:
    // zero the masked degree-3 bands before writing. Renders identically.
    let tuned = bake_mask(&tuned, cfg.mask_threshold);
    write_ply(&tuned, out).map_err(stage("write scene"))?;
    let csv = progress_csv(&rows);
    match progress {
        Some(path) => {
            fs::write(path, &csv).map_err(stage("write progress"))?;
            println!(
                "masked fraction: {:.4}",
                masked_fraction(&tuned, cfg.mask_threshold)
            );
            println!("wrote {}", out.display());
            println!("wrote {}", path.display());
        }
        // Keep stdout pure CSV when it is the progress sink.
        None => print!("{csv}"),
    }
    Ok(())
}
