//! `cmigan` command-line tool.
//!
//! Reports go to stdout (or `--output`) as JSON, logs go to stderr.
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use cmigan::datagen::ModelId;
use cmigan::estimators::EstimatorKind;

use config::Preset;

#[derive(Debug, Parser)]
#[command(name = "cmigan", version, about = "Estimate conditional mutual information and test conditional independence")]
struct Cli {
    /// Worker threads for independent runs and datasets (default: all cores).
    #[arg(short = 'j', long, global = true)]
    jobs: Option<usize>,

    /// Global seed; the generator seed for `datagen`, the training seed otherwise.
    #[arg(long, env = "CMIGAN_SEED", global = true, default_value_t = 0)]
    seed: u64,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once
enum Command {
    /// Generate a synthetic dataset (CSV plus a JSON parameter sidecar).
    Datagen(DatagenArgs),
    /// Estimate CMI (or MI when there are no z columns).
    Estimate(EstimateArgs),
    /// Score a labeled suite of datasets and report AuROC.
    Citest(CitestArgs),
    /// Check network gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Run estimators on synthetic models with known truth.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelId,
    /// Number of rows.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    /// `d` for linear3/gauss, `dz` otherwise.
    #[arg(long = "d", visible_aliases = ["dz", "dim"], default_value_t = 1)]
    pub dim: usize,
    /// Correlation for `gauss`.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    /// Couple Y to X in the `cit` model.
    #[arg(long)]
    pub dependent: bool,
    /// Write a labeled suite of this many `cit` datasets (alternating
    /// independent/dependent) plus `manifest.json` into the output directory.
    #[arg(long, requires = "output")]
    pub suite: Option<usize>,
    /// For `nonlinear`: compute the KSG reference CMI on a large fresh sample.
    #[arg(long)]
    pub reference: bool,
    /// CSV path (or directory with `--suite`).
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, conflicts_with = "generate")]
    pub data: Option<PathBuf>,
    /// Take the first dx, dy, dz columns as x, y, z (`dx,dy[,dz]`).
    #[arg(long, conflicts_with_all = ["x_cols", "mapping"])]
    pub dims: Option<String>,
    /// x columns by name or zero-based index, comma separated.
    #[arg(long, requires = "y_cols")]
    pub x_cols: Option<String>,
    #[arg(long, requires = "x_cols")]
    pub y_cols: Option<String>,
    #[arg(long, requires = "x_cols")]
    pub z_cols: Option<String>,
    /// Column mapping as JSON (`x_cols`, `y_cols`, `z_cols`, `normalization`, `shuffle_seed`).
    #[arg(long, conflicts_with = "x_cols")]
    pub mapping: Option<PathBuf>,
    /// Z-score the mapped columns when loading.
    #[arg(long)]
    pub zscore: bool,
    /// Shuffle rows with this seed after loading.
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    /// Field delimiter (single character, or `tab`).
    #[arg(long, default_value = ",")]
    pub delimiter: String,
    /// Parse decimal commas (`1,5`); needs a non-comma delimiter.
    #[arg(long)]
    pub decimal_comma: bool,
    /// Treat this value as missing (default -200, the air-quality sentinel).
    #[arg(long, allow_negative_numbers = true)]
    pub missing: Option<f64>,
    /// Keep every numeric value, including the missing-value sentinel.
    #[arg(long, conflicts_with = "missing")]
    pub no_sentinel: bool,

    /// Generate the data instead of reading a CSV.
    #[arg(long, value_parser = parse_model)]
    pub generate: Option<ModelId>,
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    /// `d` for linear3/gauss, `dz` otherwise.
    #[arg(long = "d", visible_aliases = ["dz", "dim"], default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long)]
    pub dependent: bool,
    /// Seed of the generated data (defaults to the global seed).
    #[arg(long)]
    pub data_seed: Option<u64>,
}

/// Overrides applied on top of a preset.
#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Steps per learning-rate decay interval.
    #[arg(long)]
    pub lr_interval: Option<u64>,
    /// Regressor updates per generator update.
    #[arg(long)]
    pub ratio: Option<usize>,
    #[arg(long)]
    pub noise_dim: Option<usize>,
    #[arg(long)]
    pub eval_passes: Option<usize>,
    /// Comma-separated hidden widths of the regressor.
    #[arg(long)]
    pub reg_hidden: Option<String>,
    /// Comma-separated hidden widths of the generator.
    #[arg(long)]
    pub gen_hidden: Option<String>,
    /// Train on the raw columns instead of z-scored ones.
    #[arg(long)]
    pub no_standardize: bool,
    /// Neighbors for KSG.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, short = 'e', value_parser = parse_estimator, required_unless_present = "config")]
    pub estimator: Option<EstimatorKind>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = Preset::Full)]
    pub preset: Preset,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Write per-step losses of every run to this CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Steps between trace points.
    #[arg(long, default_value_t = 10)]
    pub trace_every: u64,
    /// Re-run the configuration embedded in a previous report (or a bare run config).
    #[arg(long, conflicts_with_all = ["estimator", "data", "generate"])]
    pub config: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CitestArgs {
    /// JSON manifest listing CSV paths, labels and dims.
    #[arg(long, required_unless_present = "config")]
    pub manifest: Option<PathBuf>,
    #[arg(long, short = 'e', value_parser = parse_estimator, default_value = "cmigan")]
    pub estimator: EstimatorKind,
    /// Decide dependent when the CMI score exceeds this (nats).
    #[arg(long, default_value_t = cmigan::citest::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = Preset::FullCit)]
    pub preset: Preset,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    pub networks: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Negate the analytic gradients; the check must then fail.
    #[arg(long)]
    pub inject_sign_flip: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Estimators to run, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator, default_value = "cmigan,ksg")]
    pub estimators: Vec<EstimatorKind>,
    /// Synthetic problems as `model:dim`, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "linear1:1,linear3:1,linear3:5,gauss:1")]
    pub cases: Vec<String>,
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    /// Correlation used by `gauss` cases.
    #[arg(long, default_value_t = 0.8)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<ModelId, String> {
    s.parse().map_err(|e: cmigan::Error| e.to_string())
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse().map_err(|e: cmigan::Error| e.to_string())
}

/// Errors in the user's request rather than in the data or the numerics.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<cmigan::Error>() {
            return if e.is_numerical() {
                4
            } else if e.is_data_error() {
                3
            } else {
                2
            };
        }
        if cause.downcast_ref::<commands::CheckFailed>().is_some() {
            return 4;
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| UsageError(format!("--jobs: {e}")))?;
    }
    match cli.command {
        Command::Datagen(a) => commands::datagen(a, cli.seed),
        Command::Estimate(a) => commands::estimate(a, cli.seed),
        Command::Citest(a) => commands::citest(a, cli.seed),
        Command::Gradcheck(a) => commands::gradcheck(a, cli.seed),
        Command::Bench(a) => commands::bench(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
