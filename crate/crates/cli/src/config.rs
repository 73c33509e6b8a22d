//! Flat `key = value` run configuration shared by every subcommand.
//!
//! Values are layered: built-in defaults, then an optional config file,
//! then `--set key=value` flags, then `--seed`. Later layers win.
//! `--dump-config` prints the merged result in the same format the file
//! parser accepts, so a dump can be fed straight back in as a config file.

use std::fmt::Write as _;
use std::str::FromStr;

use spwz_core::codec::{CodecConfig, CoderKind};
use spwz_core::finetune::FinetuneConfig;

/// Which importance score drives pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreChoice {
    /// Accumulated squared image-Jacobian magnitude (sensitivity of the
    /// rendered images to each Gaussian's density).
    Hessian,
    /// Peak blend weight over all rendered pixels, optionally volume-weighted.
    Opacity,
}

impl ScoreChoice {
    pub fn name(self) -> &'static str {
        match self {
            ScoreChoice::Hessian => "hessian",
            ScoreChoice::Opacity => "opacity",
        }
    }
}

impl FromStr for ScoreChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hessian" => Ok(ScoreChoice::Hessian),
            "opacity" => Ok(ScoreChoice::Opacity),
            other => Err(format!(
                "unknown score '{other}' (expected hessian or opacity)"
            )),
        }
    }
}

/// Every knob the CLI exposes, merged from defaults, file, and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// RNG seed shared by scene generation, fine-tuning, and codebook fits.
    pub seed: u64,

    // Synthetic scene generation (`gen`).
    pub gen_count: usize,
    pub gen_degree: u8,
    pub gen_cameras: usize,
    pub gen_width: u32,
    pub gen_height: u32,

    // Importance scoring (`score`, `prune`, `compress`, `bench`).
    pub score: ScoreChoice,
    /// Volume-weighting exponent for the opacity score; 0 disables it.
    pub volume_beta: f64,
    pub prune_fraction: f64,

    // Distillation fine-tuning (`finetune`, `compress`, `bench`).
    pub iterations: usize,
    pub lambda_mask: f64,
    pub pseudo_prob: f64,
    /// Pseudo-view translation jitter; `None` ("auto") resolves to 2% of
    /// the teacher scene's bounding-box diagonal.
    pub noise_sigma: Option<f64>,
    pub lr_sh_dc: f64,
    pub lr_sh_rest: f64,
    pub lr_opacity: f64,
    pub lr_mask: f64,
    pub mask_threshold: f64,

    // Bundle encoding (`compress`, `bench`).
    pub position_bits: u8,
    pub scalar_bits: u8,
    pub k12: usize,
    pub k3: usize,
    pub coder: CoderKind,

    // Bench sweep: the cartesian product of these lists is evaluated,
    // one CSV row each. K applies to both codebooks; bits to the scalar
    // attributes (positions keep `position_bits`).
    pub bench_k: Vec<usize>,
    pub bench_bits: Vec<u8>,
    pub bench_prune: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ft = FinetuneConfig::default();
        let cc = CodecConfig::default();
        RunConfig {
            seed: 0,
            gen_count: 256,
            gen_degree: 3,
            gen_cameras: 6,
            gen_width: 64,
            gen_height: 64,
            score: ScoreChoice::Hessian,
            volume_beta: 0.0,
            prune_fraction: 0.2,
            iterations: ft.iterations,
            lambda_mask: ft.lambda_mask,
            pseudo_prob: ft.pseudo_prob,
            noise_sigma: ft.noise_sigma,
            lr_sh_dc: ft.lr_sh_dc,
            lr_sh_rest: ft.lr_sh_rest,
            lr_opacity: ft.lr_opacity,
            lr_mask: ft.lr_mask,
            mask_threshold: ft.mask_threshold,
            position_bits: cc.position_bits,
            scalar_bits: cc.scalar_bits,
            k12: cc.k12,
            k3: cc.k3,
            coder: cc.coder,
            bench_k: vec![16, 64, 256],
            bench_bits: vec![8],
            bench_prune: vec![0.0],
        }
    }
}

impl RunConfig {
    /// Apply a whole config file. Lines are `key = value`; blank lines and
    /// `#` comments are skipped. Unknown keys are errors so typos surface
    /// instead of silently running on defaults.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`, got `{line}`", idx + 1))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", idx + 1))?;
        }
        Ok(())
    }

    /// Set one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "seed" => self.seed = num(key, value)?,
            "gen_count" => self.gen_count = num(key, value)?,
            "gen_degree" => self.gen_degree = num(key, value)?,
            "gen_cameras" => self.gen_cameras = num(key, value)?,
            "gen_width" => self.gen_width = num(key, value)?,
            "gen_height" => self.gen_height = num(key, value)?,
            "score" => self.score = value.parse()?,
            "volume_beta" => self.volume_beta = num(key, value)?,
            "prune_fraction" => self.prune_fraction = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "lambda_mask" => self.lambda_mask = num(key, value)?,
            "pseudo_prob" => self.pseudo_prob = num(key, value)?,
            "noise_sigma" => {
                self.noise_sigma = if value.is_empty() || value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "lr_sh_dc" => self.lr_sh_dc = num(key, value)?,
            "lr_sh_rest" => self.lr_sh_rest = num(key, value)?,
            "lr_opacity" => self.lr_opacity = num(key, value)?,
            "lr_mask" => self.lr_mask = num(key, value)?,
            "mask_threshold" => self.mask_threshold = num(key, value)?,
            "position_bits" => self.position_bits = num(key, value)?,
            "scalar_bits" => self.scalar_bits = num(key, value)?,
            "k12" => self.k12 = num(key, value)?,
            "k3" => self.k3 = num(key, value)?,
            "coder" => self.coder = value.parse().map_err(|e| format!("coder: {e}"))?,
            "bench_k" => self.bench_k = list(key, value)?,
            "bench_bits" => self.bench_bits = list(key, value)?,
            "bench_prune" => self.bench_prune = list(key, value)?,
            other => return Err(format!("unknown config key '{other}'")),
        }
        Ok(())
    }

    /// Render the full configuration as parseable `key = value` text.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "# synthetic scene generation");
        let _ = writeln!(s, "gen_count = {}", self.gen_count);
        let _ = writeln!(s, "gen_degree = {}", self.gen_degree);
        let _ = writeln!(s, "gen_cameras = {}", self.gen_cameras);
        let _ = writeln!(s, "gen_width = {}", self.gen_width);
        let _ = writeln!(s, "gen_height = {}", self.gen_height);
        let _ = writeln!(s, "# importance scoring and pruning");
        let _ = writeln!(s, "score = {}", self.score.name());
        let _ = writeln!(s, "volume_beta = {}", self.volume_beta);
        let _ = writeln!(s, "prune_fraction = {}", self.prune_fraction);
        let _ = writeln!(s, "# distillation fine-tuning");
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "lambda_mask = {}", self.lambda_mask);
        let _ = writeln!(s, "pseudo_prob = {}", self.pseudo_prob);
        let sigma = match self.noise_sigma {
            None => "auto".to_string(),
            Some(v) => v.to_string(),
        };
        let _ = writeln!(s, "noise_sigma = {sigma}");
        let _ = writeln!(s, "lr_sh_dc = {}", self.lr_sh_dc);
        let _ = writeln!(s, "lr_sh_rest = {}", self.lr_sh_rest);
        let _ = writeln!(s, "lr_opacity = {}", self.lr_opacity);
        let _ = writeln!(s, "lr_mask = {}", self.lr_mask);
        let _ = writeln!(s, "mask_threshold = {}", self.mask_threshold);
        let _ = writeln!(s, "# bundle encoding");
        let _ = writeln!(s, "position_bits = {}", self.position_bits);
        let _ = writeln!(s, "scalar_bits = {}", self.scalar_bits);
        let _ = writeln!(s, "k12 = {}", self.k12);
        let _ = writeln!(s, "k3 = {}", self.k3);
        let _ = writeln!(s, "coder = {}", self.coder.name());
        let _ = writeln!(s, "# bench sweep (comma-separated lists)");
        let _ = writeln!(s, "bench_k = {}", join(&self.bench_k));
        let _ = writeln!(s, "bench_bits = {}", join(&self.bench_bits));
        let _ = writeln!(s, "bench_prune = {}", join(&self.bench_prune));
        s
    }

    /// The fine-tuning knobs in library form.
    pub fn finetune(&self) -> FinetuneConfig {
        FinetuneConfig {
            lambda_mask: self.lambda_mask,
            noise_sigma: self.noise_sigma,
            pseudo_prob: self.pseudo_prob,
            iterations: self.iterations,
            lr_sh_dc: self.lr_sh_dc,
            lr_sh_rest: self.lr_sh_rest,
            lr_opacity: self.lr_opacity,
            lr_mask: self.lr_mask,
            mask_threshold: self.mask_threshold,
            seed: self.seed,
        }
    }

    /// The encoder knobs in library form.
    pub fn codec(&self) -> CodecConfig {
        CodecConfig {
            position_bits: self.position_bits,
            scalar_bits: self.scalar_bits,
            k12: self.k12,
            k3: self.k3,
            coder: self.coder,
            seed: self.seed,
            mask_threshold: self.mask_threshold,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("{key}: {e}"))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
