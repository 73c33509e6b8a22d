//! `spwz` — compress, inspect, and benchmark Gaussian-splat scenes.
//!
//! Every command is deterministic for a given seed and config, except for
//! wall-clock columns (render times, fps). The environment variable
//! `SPWZ_THREADS` caps the worker-thread count; results are bit-identical
//! at any thread count, so the cap is purely a resource limit.

mod commands;
mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "spwz",
    version,
    about = "Gaussian-splat compression codec and benchmark toolkit",
    arg_required_else_help = true
)]
struct Cli {
    /// Flat `key = value` config file applied over built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set k12=64`. Repeatable; applied
    /// in order after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// RNG seed for every stage. Highest-precedence override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path: a directory for `gen`, a file elsewhere. Commands that
    /// emit CSV print to stdout when this is omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Print the merged configuration (defaults + file + flags) and exit.
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scene: PLY, camera list, ground-truth views.
    Gen,
    /// Score, prune, fine-tune, and encode a scene into one bundle file.
    Compress {
        /// Input scene (.ply).
        input: PathBuf,
        /// Camera list the pipeline scores, trains, and encodes against.
        #[arg(long, value_name = "FILE")]
        cameras: PathBuf,
    },
    /// Decode a bundle back into a PLY scene (checksum verified).
    Decompress {
        /// Input bundle file.
        input: PathBuf,
    },
    /// Render two scenes under shared cameras; report PSNR/SSIM/chamfer.
    Eval {
        /// Reference scene (.ply).
        reference: PathBuf,
        /// Candidate scene (.ply) being judged.
        candidate: PathBuf,
        #[arg(long, value_name = "FILE")]
        cameras: PathBuf,
    },
    /// Sweep codec settings over a scene; one CSV row per configuration.
    Bench {
        /// Input scene (.ply).
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        cameras: PathBuf,
    },
    /// Per-Gaussian importance scores as `index,score` CSV.
    Score {
        /// Input scene (.ply).
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        cameras: PathBuf,
    },
    /// Drop the lowest-scoring fraction of Gaussians; write the survivors.
    Prune {
        /// Input scene (.ply).
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        cameras: PathBuf,
    },
    /// Distill a student scene against a teacher, learning the SH mask.
    Finetune {
        /// Student scene (.ply); its geometry stays frozen.
        student: PathBuf,
        /// Teacher scene (.ply) whose renders the student imitates.
        #[arg(long, value_name = "FILE")]
        teacher: PathBuf,
        #[arg(long, value_name = "FILE")]
        cameras: PathBuf,
        /// Write the per-iteration progress CSV here instead of stdout.
        #[arg(long, value_name = "FILE")]
        progress: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(msg) = run(cli) {
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), String> {
    init_threads()?;
    let cfg = merge_config(&cli)?;
    if cli.dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err("no command given (see --help)".into());
    };
    let out = cli.out.as_deref();
    match command {
        Command::Gen => commands::cmd_gen(&cfg, require_out(out, "gen")?).map_err(tag("gen")),
        Command::Compress { input, cameras } => {
            commands::cmd_compress(&cfg, &input, &cameras, require_out(out, "compress")?)
                .map_err(tag("compress"))
        }
        Command::Decompress { input } => {
            commands::cmd_decompress(&input, require_out(out, "decompress")?)
                .map_err(tag("decompress"))
        }
        Command::Eval {
            reference,
            candidate,
            cameras,
        } => commands::cmd_eval(&reference, &candidate, &cameras, out).map_err(tag("eval")),
        Command::Bench { input, cameras } => {
            commands::cmd_bench(&cfg, &input, &cameras, out).map_err(tag("bench"))
        }
        Command::Score { input, cameras } => {
            commands::cmd_score(&cfg, &input, &cameras, out).map_err(tag("score"))
        }
        Command::Prune { input, cameras } => {
            commands::cmd_prune(&cfg, &input, &cameras, require_out(out, "prune")?)
                .map_err(tag("prune"))
        }
        Command::Finetune {
            student,
            teacher,
            cameras,
            progress,
        } => commands::cmd_finetune(
            &cfg,
            &student,
            &teacher,
            &cameras,
            require_out(out, "finetune")?,
            progress.as_deref(),
        )
        .map_err(tag("finetune")),
    }
}

fn tag(verb: &'static str) -> impl FnOnce(String) -> String {
    move |e| format!("{verb}: {e}")
}

fn require_out<'a>(out: Option<&'a Path>, verb: &str) -> Result<&'a Path, String> {
    out.ok_or_else(|| format!("{verb}: --out is required"))
}

/// Defaults, then the config file, then `--set` pairs in order, then `--seed`.
fn merge_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        cfg.apply_text(&text)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
    }
    for pair in &cli.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| format!("--set: expected KEY=VALUE, got `{pair}`"))?;
        cfg.set(key.trim(), value.trim())
            .map_err(|e| format!("--set: {e}"))?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Honor `SPWZ_THREADS` as a cap on the global worker pool. Must run before
/// anything touches the pool, so it is the first thing `run` does.
fn init_threads() -> Result<(), String> {
    let raw = match std::env::var("SPWZ_THREADS") {
        Ok(v) => v,
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(format!("SPWZ_THREADS: {e}")),
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("SPWZ_THREADS: not a thread count: `{raw}`"))?;
    if n == 0 {
        return Err("SPWZ_THREADS: must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("SPWZ_THREADS: {e}"))
}
