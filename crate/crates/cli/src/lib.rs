//! Batch front-end for fitting cluster vocabularies, segmenting feature
//! tiles and scoring the results against ground truth.

mod cmd;
mod files;
pub mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fseg_core::factorization::{NmfConfig, NmfSolver};
use fseg_core::segmentation::{ResizeMode, SegmentationMode};
use serde::Serialize;

pub use manifest::{Failure, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "fseg", version, about = "Segmentation of deep feature tiles by non-negative matrix factorization")]
pub struct Cli {
    /// Seed for every random draw (NMF initialization, k-means, probe).
    #[arg(long, global = true, default_value_t = 17)]
    pub seed: u64,

    /// Worker threads for batch commands; 0 uses all logical cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Minimum level of log lines written to stderr.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: log::LevelFilter,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a k-means vocabulary over pooled feature vectors.
    ClusterFit(ClusterFitArgs),
    /// Segment feature tensors against a cluster vocabulary.
    Segment(SegmentArgs),
    /// Score cluster masks by frequency-based cluster-to-category matching.
    EvalMatch(EvalMatchArgs),
    /// Score tiles with a linear probe trained on factorized concepts.
    EvalProbe(EvalProbeArgs),
    /// Print FST headers.
    Info(InfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    FullNmf,
    FixedH,
}

impl From<ModeArg> for SegmentationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::FullNmf => SegmentationMode::FullNmfCosine,
            ModeArg::FixedH => SegmentationMode::FixedH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResizeArg {
    Nearest,
    BilinearW,
}

impl From<ResizeArg> for ResizeMode {
    fn from(m: ResizeArg) -> Self {
        match m {
            ResizeArg::Nearest => ResizeMode::NearestLabel,
            ResizeArg::BilinearW => ResizeMode::BilinearW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    Hals,
    Mu,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NmfArgs {
    /// Maximum NMF sweeps per tile.
    #[arg(long, default_value_t = 200)]
    pub nmf_max_iters: usize,
    /// Relative objective change that stops the NMF early.
    #[arg(long, default_value_t = 1e-4)]
    pub nmf_tol: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::Hals)]
    pub solver: SolverArg,
    /// Inner passes per factor block within one sweep.
    #[arg(long, default_value_t = 5)]
    pub inner_iters: usize,
}

impl NmfArgs {
    pub fn config(&self, seed: u64) -> NmfConfig {
        NmfConfig {
            max_iters: self.nmf_max_iters,
            tol: self.nmf_tol,
            seed,
            inner_iters: self.inner_iters,
            solver: match self.solver {
                SolverArg::Hals => NmfSolver::Hals,
                SolverArg::Mu => NmfSolver::Multiplicative,
            },
            ..NmfConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClusterFitArgs {
    /// Directory of FST features: 1D pooled vectors, 2D matrices (one vector
    /// per row) or 3D tensors (pooled on the fly).
    #[arg(long)]
    pub features: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub n_init: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Extra `key=value` metadata stored with the model (repeatable).
    #[arg(long = "meta", value_parser = parse_key_value)]
    pub meta: Vec<(String, String)>,
    /// Output prefix: writes `<out>.fst`, `<out>.meta.json` and
    /// `<out>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SegmentArgs {
    /// An FST tensor or a directory of them.
    #[arg(long)]
    pub features: PathBuf,
    /// Cluster model prefix (as written by `cluster-fit`).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Factorization rank per tile; required with `--mode full-nmf`.
    #[arg(long, required_if_eq("mode", "full-nmf"), value_parser = clap::value_parser!(u32).range(1..))]
    pub k_concepts: Option<u32>,
    /// Upsample masks to `HxW` pixels.
    #[arg(long, value_parser = parse_dims)]
    pub resize: Option<(usize, usize)>,
    #[arg(long, value_enum, default_value_t = ResizeArg::Nearest)]
    pub resize_mode: ResizeArg,
    /// Stretch labels over 0..255 in the PGM previews.
    #[arg(long)]
    pub scale_pgm: bool,
    #[command(flatten)]
    pub nmf: NmfArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PaletteArgs {
    /// Text file of `source_code target_category` lines.
    #[arg(long)]
    pub palette: PathBuf,
    /// Reject palettes that merge several codes into one category.
    #[arg(long)]
    pub strict_palette: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalMatchArgs {
    /// Directory of predicted cluster masks (`<stem>.mask.fst`).
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth mask images, paired by file stem.
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub palette: PaletteArgs,
    /// Normalize cluster/category overlap by category size before matching.
    #[arg(long)]
    pub normalized: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalProbeArgs {
    /// Directory of FST feature tensors.
    #[arg(long)]
    pub features: PathBuf,
    /// Directory of ground-truth mask images, paired by file stem.
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub palette: PaletteArgs,
    /// Cluster model prefix; required with `--mode fixed-h`.
    #[arg(long, required_if_eq("mode", "fixed-h"))]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Factorization rank per tile; required with `--mode full-nmf`.
    #[arg(long, required_if_eq("mode", "full-nmf"), value_parser = clap::value_parser!(u32).range(1..))]
    pub k_concepts: Option<u32>,
    /// Minimum share of a concept's pixels in one category for it to become
    /// a training example.
    #[arg(long, default_value_t = 0.75)]
    pub threshold: f64,
    /// L2 penalty on probe weights.
    #[arg(long, default_value_t = 1e-3)]
    pub reg: f64,
    /// Train and classify without a bias term.
    #[arg(long)]
    pub no_bias: bool,
    #[arg(long, default_value_t = 20_000)]
    pub probe_max_iters: usize,
    #[command(flatten)]
    pub nmf: NmfArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InfoArgs {
    /// FST files to describe.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Also write `headers.json` and a run manifest to this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    if h == 0 || w == 0 {
        return Err(format!("dimensions must be positive, got {s:?}"));
    }
    Ok((h, w))
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.to_string()))
}

/// Shared state handed to every command.
pub(crate) struct Context {
    pub seed: u64,
    pub pool: rayon::ThreadPool,
}

/// What a command did, for the manifest.
#[derive(Debug, Default)]
pub(crate) struct Record {
    pub params: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub failures: Vec<Failure>,
    /// Where the manifest goes; `None` skips writing it.
    pub manifest_path: Option<PathBuf>,
}

/// Outcome of a successful run.
#[derive(Debug)]
pub struct RunStatus {
    pub manifest: RunManifest,
    pub manifest_path: Option<PathBuf>,
}

impl RunStatus {
    pub fn failed_items(&self) -> usize {
        self.manifest.failures.len()
    }
}

/// Installs the stderr logger (`level key=value ...` lines).
pub fn init_logging(level: log::LevelFilter) {
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .format(|buf, record| writeln!(buf, "{} {}", record.level().as_str().to_lowercase(), record.args()))
        .try_init();
}

/// Runs a parsed command. `raw_args` (without the program name) is stored
/// in the manifest so the run can be repeated verbatim.
pub fn run(cli: &Cli, raw_args: &[OsString]) -> Result<RunStatus> {
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build().context("building worker pool")?;
    let ctx = Context { seed: cli.seed, pool };
    let (name, record) = match &cli.command {
        Command::ClusterFit(a) => ("cluster-fit", cmd::cluster_fit::run(&ctx, a)?),
        Command::Segment(a) => ("segment", cmd::segment::run(&ctx, a)?),
        Command::EvalMatch(a) => ("eval-match", cmd::eval_match::run(&ctx, a)?),
        Command::EvalProbe(a) => ("eval-probe", cmd::eval_probe::run(&ctx, a)?),
        Command::Info(a) => ("info", cmd::info::run(&ctx, a)?),
    };
    for f in &record.failures {
        log::error!("event=item_failed item={} error={:?}", f.item, f.error);
    }
    let manifest = RunManifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        args: raw_args.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        seed: cli.seed,
        jobs: ctx.pool.current_num_threads(),
        params: record.params,
        inputs: record.inputs,
        outputs: record.outputs,
        failures: record.failures,
        duration_ms: started.elapsed().as_millis() as u64,
    };
    if let Some(path) = &record.manifest_path {
        manifest.write(path)?;
    }
    log::info!("event=done command={name} outputs={} failures={}", manifest.outputs.len(), manifest.failures.len());
    Ok(RunStatus { manifest, manifest_path: record.manifest_path })
}
