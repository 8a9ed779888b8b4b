//! Command-line entry point.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 artifact-compatibility error, 5 numerical/training failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spectrograsp_cli::config::{load_json_config, EvalSide};
use spectrograsp_cli::{
    cmd_eval, cmd_gen, cmd_report, cmd_stream, cmd_train, EvalRunConfig, ReportRunConfig,
    StreamRunConfig, TrainRunConfig,
};
use spectrograsp_core::error::Error;
use spectrograsp_core::simgrasp::GenConfig;

#[derive(Parser)]
#[command(
    name = "spectrograsp",
    about = "Streaming spectral material classification pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GenArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON generator config (gen_config.json schema).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes_per_class: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    n_frames: Option<usize>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    gel_attenuation: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON train config (train_config.json schema).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model family: logistic, linear-svm, rbf-svm, or mlp.
    #[arg(long)]
    family: Option<String>,
    /// NMF component count.
    #[arg(long)]
    k: Option<usize>,
    /// Inclusive component sweep, e.g. 5..25.
    #[arg(long, value_name = "LO..HI")]
    k_sweep: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// Training fraction of the episode split.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    savgol_window: Option<usize>,
    #[arg(long)]
    savgol_degree: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Which side of the stored split to evaluate: test or train.
    #[arg(long, default_value = "test")]
    on: String,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Stream freshly generated episodes instead of the dataset's.
    #[arg(long)]
    fresh_episodes: Option<usize>,
    #[arg(long)]
    fresh_seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Training run directory (enables the accuracy-vs-k bundle).
    #[arg(long)]
    train_dir: Option<PathBuf>,
    /// Stream run directory (enables the belief-trajectory bundle).
    #[arg(long)]
    stream_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic grasp dataset.
    Gen(GenArgs),
    /// Split, factorize, grid-search, and train a classifier.
    Train(TrainArgs),
    /// Evaluate a trained model on the held-out split.
    Eval(EvalArgs),
    /// Stream episodes through the recursive Bayes filter.
    Stream(StreamArgs),
    /// Emit plot-data CSV bundles from existing artifacts.
    Report(ReportArgs),
}

fn parse_sweep(s: &str) -> Result<(usize, usize), Error> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| Error::Parameter(format!("k sweep {s:?} is not LO..HI")))?;
    let lo = lo
        .trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("bad sweep bound {lo:?}")))?;
    let hi = hi
        .trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("bad sweep bound {hi:?}")))?;
    Ok((lo, hi))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Gen(args) => {
            let mut cfg = match &args.config {
                Some(path) => load_json_config::<GenConfig>(path)?,
                None => GenConfig::default(),
            };
            if let Some(v) = args.seed {
                cfg.seed = v;
            }
            if let Some(v) = args.episodes_per_class {
                cfg.episodes_per_class = v;
            }
            if let Some(v) = args.channels {
                cfg.channels = v;
            }
            if let Some(v) = args.n_frames {
                cfg.n_frames = v;
            }
            if let Some(v) = args.snr {
                cfg.snr = v;
            }
            if let Some(v) = args.gel_attenuation {
                cfg.gel_attenuation = v;
            }
            cmd_gen(&cfg, &args.out)?;
        }
        Command::Train(args) => {
            let mut cfg = match &args.config {
                Some(path) => load_json_config::<TrainRunConfig>(path)?,
                None => TrainRunConfig::new(args.dataset.clone()),
            };
            cfg.dataset = args.dataset;
            if let Some(v) = args.seed {
                cfg.seed = v;
            }
            if let Some(v) = args.family {
                cfg.family = v;
            }
            if let Some(v) = args.k {
                cfg.k = v;
            }
            if let Some(s) = args.k_sweep {
                cfg.k_sweep = Some(parse_sweep(&s)?);
            }
            if let Some(v) = args.folds {
                cfg.folds = v;
            }
            if let Some(v) = args.split {
                cfg.split = v;
            }
            if let Some(v) = args.savgol_window {
                cfg.savgol_window = v;
            }
            if let Some(v) = args.savgol_degree {
                cfg.savgol_degree = v;
            }
            cmd_train(&cfg, &args.out)?;
        }
        Command::Eval(args) => {
            let on = match args.on.as_str() {
                "test" => EvalSide::Test,
                "train" => EvalSide::Train,
                other => {
                    return Err(Error::Parameter(format!(
                        "--on must be test or train, got {other:?}"
                    )))
                }
            };
            let cfg = EvalRunConfig {
                schema_version: spectrograsp_cli::config::SCHEMA_VERSION,
                dataset: args.dataset,
                model_dir: args.model_dir,
                on,
            };
            cmd_eval(&cfg, &args.out)?;
        }
        Command::Stream(args) => {
            let mut cfg = match &args.config {
                Some(path) => load_json_config::<StreamRunConfig>(path)?,
                None => StreamRunConfig {
                    schema_version: spectrograsp_cli::config::SCHEMA_VERSION,
                    dataset: args.dataset.clone(),
                    model_dir: args.model_dir.clone(),
                    kappa: 0.95,
                    n_max: 65,
                    fresh_episodes: None,
                    fresh_seed: 777,
                },
            };
            cfg.dataset = args.dataset;
            cfg.model_dir = args.model_dir;
            if let Some(v) = args.kappa {
                cfg.kappa = v;
            }
            if let Some(v) = args.n_max {
                cfg.n_max = v;
            }
            if let Some(v) = args.fresh_episodes {
                cfg.fresh_episodes = Some(v);
            }
            if let Some(v) = args.fresh_seed {
                cfg.fresh_seed = v;
            }
            cmd_stream(&cfg, &args.out)?;
        }
        Command::Report(args) => {
            let cfg = ReportRunConfig {
                schema_version: spectrograsp_cli::config::SCHEMA_VERSION,
                dataset: args.dataset,
                train_dir: args.train_dir,
                stream_dir: args.stream_dir,
                savgol_window: 17,
                savgol_degree: 5,
            };
            cmd_report(&cfg, &args.out)?;
        }
    }
    Ok(())
}

/// Exit-code classes: configuration, data, compatibility, numerical.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::AtFrame { source, .. } => exit_code_for(source),
        Error::Parameter(_) => 2,
        Error::Io { .. } | Error::Parse { .. } | Error::Dimension(_) | Error::Domain(_) => 3,
        Error::Compatibility(_) => 4,
        Error::DegenerateCalibration(_)
        | Error::DegenerateObservation
        | Error::Training(_)
        | Error::Stratification(_) => 5,
    }
}

fn main() -> ExitCode {
    // SPECTROGRASP_THREADS caps worker parallelism; 0 or unset means auto.
    if let Ok(v) = std::env::var("SPECTROGRASP_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
