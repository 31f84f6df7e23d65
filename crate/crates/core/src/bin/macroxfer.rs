//! Command-line entry point: config-driven experiment runs plus direct
//! subcommands for synthetic data, temporal disaggregation, and metric
//! recomputation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use macroxfer::disagg::{AggregationMode, QuarterlyAggregate, RhoSpec};
use macroxfer::error::Error;
use macroxfer::experiment::{
    evaluate_predictions_csv, run_experiment, run_transfer_comparison, thread_cap_from_env,
    DisaggMethod, DisaggSettings, ExperimentConfig, SynthSettings, TaskKind, TransformKind,
};

#[derive(Parser)]
#[command(
    name = "macroxfer",
    version,
    about = "Macroeconomic time-series modeling: training, transfer, tuning, disaggregation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment described by a JSON config file.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
    },
    /// Run the hyperparameter search of a config (the config must carry a
    /// tuner block) and report the winning settings.
    Tune {
        /// Path to the experiment config.
        config: PathBuf,
    },
    /// Run a transfer config and a target-only baseline, then compare them.
    Transfer {
        /// Path to the experiment config (must carry a transfer block).
        config: PathBuf,
    },
    /// Distribute a quarterly series over months guided by monthly
    /// indicators.
    Disagg(DisaggArgs),
    /// Generate a synthetic business-cycle dataset.
    Synth {
        /// Generator seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of quarters.
        #[arg(long, default_value_t = 400)]
        n: usize,
        /// Output CSV path.
        #[arg(long, default_value = "synth.csv")]
        out: PathBuf,
    },
    /// Recompute metrics from a predictions CSV written by `run`.
    Eval {
        /// Path to a predictions CSV (date,score,label or
        /// date,estimate,label).
        predictions: PathBuf,
    },
}

#[derive(Args)]
struct DisaggArgs {
    /// Quarterly target CSV (date plus one value column).
    #[arg(long)]
    target: PathBuf,
    /// Monthly indicators CSV.
    #[arg(long)]
    indicators: PathBuf,
    /// Disaggregation engine.
    #[arg(long, value_enum)]
    method: MethodArg,
    /// How quarterly values relate to months: sums of months (flow) or
    /// third-month snapshots (stock).
    #[arg(long, value_enum, default_value_t = ModeArg::Flow)]
    mode: ModeArg,
    /// Residual autocorrelation: a number in (-1, 1) or "estimate".
    #[arg(long, default_value = "estimate", allow_negative_numbers = true)]
    rho: String,
    /// Feature transform for the neural method (level or yoy).
    #[arg(long, value_enum, default_value_t = TransformArg::Level)]
    transform: TransformArg,
    /// Training epochs for the neural method.
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Seed for the neural method.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Quarterly reduction used when evaluating the neural method.
    #[arg(long, value_enum, default_value_t = EvalArg::Mean)]
    quarterly_eval: EvalArg,
    /// Output CSV path.
    #[arg(long, default_value = "monthly.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Chowlin,
    Ride,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Flow,
    Stock,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    Level,
    Yoy,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalArg {
    Mean,
    Sum,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("macroxfer: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> macroxfer::Result<()> {
    // An unusable thread cap is a config error no matter the subcommand.
    thread_cap_from_env()?;
    match cli.command {
        Command::Run { config } => {
            let config = ExperimentConfig::load(&config)?;
            let artifacts = run_experiment(&config)?;
            report_files(&artifacts.files);
            if let Some(metrics) = &artifacts.metrics {
                print_headline(metrics);
            }
            Ok(())
        }
        Command::Tune { config } => {
            let config = ExperimentConfig::load(&config)?;
            if config.tuner.is_none() {
                return Err(Error::config(
                    "the tune command needs a config with a tuner block",
                ));
            }
            let artifacts = run_experiment(&config)?;
            report_files(&artifacts.files);
            if let Some(metrics) = &artifacts.metrics {
                print_headline(metrics);
            }
            Ok(())
        }
        Command::Transfer { config } => {
            let config = ExperimentConfig::load(&config)?;
            let (artifacts, report) = run_transfer_comparison(&config)?;
            report_files(&artifacts.files);
            println!(
                "negative_transfer: {}",
                if report.negative_transfer { "yes" } else { "no" }
            );
            Ok(())
        }
        Command::Disagg(args) => {
            let rho = parse_rho(&args.rho)?;
            let config = ExperimentConfig {
                task: TaskKind::Disaggregation,
                transform: match args.transform {
                    TransformArg::Level => TransformKind::Level,
                    TransformArg::Yoy => TransformKind::Yoy,
                },
                disagg: Some(DisaggSettings {
                    target: path_string(&args.target),
                    indicators: path_string(&args.indicators),
                    method: match args.method {
                        MethodArg::Chowlin => DisaggMethod::Chowlin,
                        MethodArg::Ride => DisaggMethod::Ride,
                    },
                    aggregation: match args.mode {
                        ModeArg::Flow => AggregationMode::Flow,
                        ModeArg::Stock => AggregationMode::Stock,
                    },
                    rho,
                    quarterly_eval: match args.quarterly_eval {
                        EvalArg::Mean => QuarterlyAggregate::Mean,
                        EvalArg::Sum => QuarterlyAggregate::Sum,
                    },
                    out: file_name(&args.out)?,
                }),
                seed: args.seed,
                output_dir: parent_dir(&args.out),
                train: macroxfer::experiment::TrainSettings {
                    epochs: args.epochs,
                    ..Default::default()
                },
                ..empty_config(TaskKind::Disaggregation)
            };
            let artifacts = run_experiment(&config)?;
            report_files(&artifacts.files);
            Ok(())
        }
        Command::Synth { seed, n, out } => {
            let config = ExperimentConfig {
                task: TaskKind::Synth,
                synth: Some(SynthSettings {
                    n,
                    out: file_name(&out)?,
                }),
                seed,
                output_dir: parent_dir(&out),
                ..empty_config(TaskKind::Synth)
            };
            let artifacts = run_experiment(&config)?;
            report_files(&artifacts.files);
            Ok(())
        }
        Command::Eval { predictions } => {
            let report = evaluate_predictions_csv(&predictions)?;
            println!("{}", report.to_json_string());
            Ok(())
        }
    }
}

/// A config skeleton with every optional block absent.
fn empty_config(task: TaskKind) -> ExperimentConfig {
    let json = serde_json::json!({ "task": task });
    serde_json::from_value(json).expect("the skeleton config deserializes")
}

fn parse_rho(raw: &str) -> macroxfer::Result<RhoSpec> {
    if raw == "estimate" {
        return Ok(RhoSpec::Estimate);
    }
    let value: f64 = raw.parse().map_err(|_| {
        Error::config(format!(
            "--rho must be a number in (-1, 1) or \"estimate\", got \"{raw}\""
        ))
    })?;
    Ok(RhoSpec::Fixed(value))
}

fn path_string(path: &std::path::Path) -> String {
    path.to_string_lossy().into_owned()
}

fn file_name(path: &std::path::Path) -> macroxfer::Result<String> {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Error::config(format!("{} has no file name", path.display())))
}

fn parent_dir(path: &std::path::Path) -> String {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_string_lossy().into_owned(),
        _ => ".".into(),
    }
}

fn report_files(files: &[PathBuf]) {
    for file in files {
        println!("wrote {}", file.display());
    }
}

fn print_headline(metrics: &macroxfer::metrics::MetricReport) {
    if let Some(auc) = metrics.auc {
        println!("auc: {auc:.6}");
    }
    if let Some(mae) = metrics.mae {
        println!("mae: {mae:.6}");
    }
}
