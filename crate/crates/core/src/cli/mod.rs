//! The `colordesc` command line.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime or
//! numeric error.

mod config;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use config::RunConfig;

use crate::corpus::{load_corpus, ColorHsl, ColorHsv, ColorSpace, Dataset, Description, Manifest, Split};
use crate::denotation::{probability_field, write_denotation, GridSpec};
use crate::error::Error;
use crate::eval::{evaluate, permutation_test, EvalReport, DEFAULT_ROUNDS};
use crate::features::hsl_to_hsv;
use crate::models::{
    load_checkpoint, save_checkpoint, train_model, DescriptionModel, Model, DEFAULT_BEAM_WIDTH,
    DEFAULT_MAX_LEN, PRNG_ID,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "colordesc", version, about = "Conditional color-description language models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write `model.ckpt`, `train.log` and `run-meta.json`.
    Train(Box<TrainArgs>),
    /// Evaluate a checkpoint on one corpus split and write a JSON report.
    Eval(EvalArgs),
    /// Paired permutation test between two reports on the same split.
    Compare(CompareArgs),
    /// Draw descriptions for a color.
    Sample(SampleArgs),
    /// Print the most probable description for a color.
    Top1(Top1Args),
    /// Render L/R cross-sections of P(description | color) as PGM images.
    Denotation(DenotationArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// key=value configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// rnn, atomic or hm
    #[arg(long)]
    pub family: Option<String>,
    /// raw, buckets or fourier
    #[arg(long)]
    pub features: Option<String>,
    /// every-step or init-state
    #[arg(long)]
    pub conditioning: Option<String>,
    /// Corpus manifest with train/dev/test paths.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Color space of the corpus files (hsv or hsl).
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub evals_per_epoch: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub bucket_dim: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Fixed-order gradient reduction (true or false).
    #[arg(long)]
    pub deterministic: Option<bool>,
}

impl TrainArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut push = |k: &'static str, x: Option<String>| {
            if let Some(x) = x {
                v.push((k, x));
            }
        };
        push("family", self.family.clone());
        push("features", self.features.clone());
        push("conditioning", self.conditioning.clone());
        push("space", self.space.clone());
        push("seed", self.seed.map(|x| x.to_string()));
        push("learning_rate", self.learning_rate.map(|x| x.to_string()));
        push("batch_size", self.batch_size.map(|x| x.to_string()));
        push("max_epochs", self.max_epochs.map(|x| x.to_string()));
        push("patience", self.patience.map(|x| x.to_string()));
        push("evals_per_epoch", self.evals_per_epoch.map(|x| x.to_string()));
        push("hidden", self.hidden.map(|x| x.to_string()));
        push("embedding_dim", self.embedding_dim.map(|x| x.to_string()));
        push("bucket_dim", self.bucket_dim.map(|x| x.to_string()));
        push("dropout", self.dropout.map(|x| x.to_string()));
        push("smoothing", self.smoothing.map(|x| x.to_string()));
        push("deterministic", self.deterministic.map(|x| x.to_string()));
        v
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Corpus manifest.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "dev")]
    pub split: Split,
    #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
    pub beam: usize,
    /// Report path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub space: Option<String>,
    /// Exclude zero-probability items from perplexity instead of failing.
    #[arg(long)]
    pub exclude_zero: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub report_a: PathBuf,
    pub report_b: PathBuf,
    /// logprob or accuracy
    #[arg(long, default_value = "logprob")]
    pub metric: String,
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the result as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(id = "color", required = true, multiple = false)]
pub struct ColorArg {
    /// h,s,v with h in degrees and s, v in percent
    #[arg(long, value_parser = parse_triple, group = "color")]
    pub hsv: Option<[f64; 3]>,
    /// h,s,l with h in degrees and s, l in percent
    #[arg(long, value_parser = parse_triple, group = "color")]
    pub hsl: Option<[f64; 3]>,
}

impl ColorArg {
    pub fn to_hsv(&self) -> crate::Result<ColorHsv> {
        match (self.hsv, self.hsl) {
            (Some([h, s, v]), _) => ColorHsv::new(h, s, v),
            (None, Some([h, s, l])) => Ok(hsl_to_hsv(ColorHsl::new(h, s, l)?)),
            (None, None) => Err(Error::Config("one of --hsv or --hsl is required".into())),
        }
    }
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("not a number: {p:?}"))?;
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub color: ColorArg,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
}

#[derive(Debug, Args)]
pub struct Top1Args {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub color: ColorArg,
    #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
    pub beam: usize,
}

#[derive(Debug, Args)]
pub struct DenotationArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long = "desc")]
    pub description: String,
    /// HxSxL grid resolution.
    #[arg(long, default_value = "120x50x50")]
    pub grid: GridSpec,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::Corpus(_)
            | Error::Color(_)
            | Error::EmptyDescription
            | Error::Unencodable(_)
            | Error::LengthMismatch(..)
            | Error::Report(_) => EXIT_USAGE,
            Error::Io { .. }
            | Error::Shape(_)
            | Error::Numeric(_)
            | Error::Divergence { .. }
            | Error::ZeroProbability { .. }
            | Error::Checkpoint { .. } => EXIT_RUNTIME,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

/// Errors reading user-supplied inputs are usage errors.
fn input<T>(r: crate::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError {
        code: EXIT_USAGE,
        message: e.to_string(),
    })
}

#[derive(Debug, Serialize)]
struct RunMeta<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    prng: &'a str,
    args: Vec<String>,
    config: C,
}

fn write_meta<C: Serialize>(path: &Path, command: &str, args: &[String], config: C) -> Result<(), CliError> {
    let meta = RunMeta {
        command,
        version: env!("CARGO_PKG_VERSION"),
        prng: PRNG_ID,
        args: args.to_vec(),
        config,
    };
    let text = serde_json::to_string_pretty(&meta).expect("run metadata is serializable") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e).into())
}

fn load_split(manifest_path: &Path, split: Split, space: Option<ColorSpace>) -> Result<Option<Dataset>, CliError> {
    let manifest = input(Manifest::load(manifest_path))?;
    let Some(path) = manifest.path(split) else {
        return Ok(None);
    };
    let space = space.or(manifest.color_space).unwrap_or_default();
    input(load_corpus(path, space, split)).map(Some)
}

fn parse_space(s: &Option<String>) -> Result<Option<ColorSpace>, CliError> {
    Ok(match s {
        Some(s) => Some(input(s.parse())?),
        None => None,
    })
}

fn cmd_train(a: &TrainArgs, argv: &[String]) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &a.config {
        input(cfg.apply_file(path))?;
    }
    let here = Path::new(".");
    for (k, v) in a.overrides() {
        input(cfg.set(k, &v, here))?;
    }
    if let Some(d) = &a.data {
        cfg.data = Some(d.clone());
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    input(cfg.training.validate())?;
    let data = input(cfg.require_data())?.to_path_buf();
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::from(Error::Config("missing required key `out`".into())))?;
    let train = load_split(&data, Split::Train, cfg.space)?.ok_or_else(|| {
        CliError::from(Error::Config(format!(
            "manifest {} lacks required key `train`",
            data.display()
        )))
    })?;
    let dev = load_split(&data, Split::Dev, cfg.space)?;

    let (model, log) = train_model(cfg.family, &train, dev.as_ref(), &cfg.training)?;
    create_dir(&out)?;
    save_checkpoint(&model, &out.join("model.ckpt"))?;
    let log_path = out.join("train.log");
    fs::write(&log_path, log.to_jsonl()).map_err(|e| Error::io(&log_path, e))?;
    write_meta(&out.join("run-meta.json"), "train", argv, &cfg)?;
    println!(
        "trained {} for {:.2} epochs on {} items; wrote {}",
        cfg.family,
        log.epochs_trained,
        train.len(),
        out.join("model.ckpt").display()
    );
    Ok(())
}

fn cmd_eval(a: &EvalArgs, argv: &[String]) -> Result<(), CliError> {
    let space = parse_space(&a.space)?;
    let model = load_checkpoint(&a.checkpoint)?;
    let data = load_split(&a.data, a.split, space)?.ok_or_else(|| {
        CliError::from(Error::Config(format!(
            "manifest {} lacks key `{}`",
            a.data.display(),
            a.split
        )))
    })?;
    let report = evaluate(&model, &data, a.beam, a.exclude_zero)?;
    report.save(&a.out)?;
    let mut meta = a.out.clone().into_os_string();
    meta.push(".run-meta.json");
    write_meta(
        Path::new(&meta),
        "eval",
        argv,
        serde_json::json!({
            "checkpoint": a.checkpoint,
            "data": a.data,
            "split": a.split.to_string(),
            "beam": a.beam,
            "exclude_zero": a.exclude_zero,
        }),
    )?;
    println!(
        "{} {}: perplexity {:.4}  AIC {:.1}  accuracy {:.2}%  (n={}, k={})",
        report.family, report.split, report.perplexity, report.aic, report.accuracy, report.n, report.k
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct Comparison {
    report_a: PathBuf,
    report_b: PathBuf,
    metric: String,
    n: usize,
    mean_a: f64,
    mean_b: f64,
    rounds: usize,
    seed: u64,
    p_value: f64,
}

fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    let ra = input(EvalReport::load(&a.report_a))?;
    let rb = input(EvalReport::load(&a.report_b))?;
    let xa = input(ra.per_item(&a.metric))?;
    let xb = input(rb.per_item(&a.metric))?;
    if xa.len() != xb.len() {
        return Err(CliError {
            code: EXIT_USAGE,
            message: format!("reports cover different numbers of items ({} vs {})", xa.len(), xb.len()),
        });
    }
    if ra.split != rb.split {
        return Err(CliError {
            code: EXIT_USAGE,
            message: format!("reports are for different splits ({} vs {})", ra.split, rb.split),
        });
    }
    let p = permutation_test(&xa, &xb, a.rounds, a.seed)?;
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let rec = Comparison {
        report_a: a.report_a.clone(),
        report_b: a.report_b.clone(),
        metric: a.metric.clone(),
        n: xa.len(),
        mean_a: mean(&xa),
        mean_b: mean(&xb),
        rounds: a.rounds,
        seed: a.seed,
        p_value: p,
    };
    if let Some(out) = &a.out {
        let text = serde_json::to_string_pretty(&rec).expect("serializable") + "\n";
        fs::write(out, text).map_err(|e| Error::io(out, e))?;
    }
    println!(
        "{}: mean A {:.6}  mean B {:.6}  p = {} (R = {}, n = {})",
        rec.metric, rec.mean_a, rec.mean_b, rec.p_value, rec.rounds, rec.n
    );
    Ok(())
}

fn cmd_sample(a: &SampleArgs) -> Result<(), CliError> {
    let c = input(a.color.to_hsv())?;
    let model = load_checkpoint(&a.checkpoint)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for _ in 0..a.n {
        println!("{}", model.sample(&c, &mut rng, a.max_len).normalized());
    }
    Ok(())
}

fn cmd_top1(a: &Top1Args) -> Result<(), CliError> {
    let c = input(a.color.to_hsv())?;
    if a.beam == 0 {
        return Err(Error::Config("--beam must be ≥ 1".into()).into());
    }
    let model = load_checkpoint(&a.checkpoint)?;
    println!("{}", model.predict_top1(&c, a.beam).normalized());
    Ok(())
}

fn cmd_denotation(a: &DenotationArgs, argv: &[String]) -> Result<(), CliError> {
    let d = input(Description::new(a.description.clone()))?;
    let model: Model = load_checkpoint(&a.checkpoint)?;
    let field = probability_field(&model, &d, a.grid)?;
    let files = write_denotation(
        &a.out,
        &d,
        &field,
        &[
            ("checkpoint", a.checkpoint.display().to_string()),
            ("family", model.family().to_string()),
        ],
    )?;
    write_meta(
        &a.out.join("run-meta.json"),
        "denotation",
        argv,
        serde_json::json!({
            "checkpoint": a.checkpoint,
            "description": d.normalized(),
            "grid": a.grid.to_string(),
        }),
    )?;
    println!("wrote {} and {}", files.left.display(), files.right.display());
    Ok(())
}

pub fn execute(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => cmd_train(a, argv),
        Command::Eval(a) => cmd_eval(a, argv),
        Command::Compare(a) => cmd_compare(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Top1(a) => cmd_top1(a),
        Command::Denotation(a) => cmd_denotation(a, argv),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
