//! Config-driven experiment pipeline: load and transform CSV data, split,
//! optionally tune, train (or transfer), evaluate, and write deterministic
//! artifact files (metrics, histories, predictions, trial logs).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::disagg::{
    chow_lin, ride_train, AggregationMode, DisaggregationProblem, QuarterlyAggregate, RhoSpec,
    RideConfig, RideTransform,
};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::metrics::MetricReport;
use crate::network::{
    Activation, LstmSpec, Network, NetworkSpec, RegKind, Regularization,
};
use crate::optim::{
    predict, Objective, OptimizerKind, SampleSet, Task, TrainConfig, TrainHistory, Trainer,
};
use crate::series::{
    label_stats, split, Frequency, ScalerParams, SeriesFrame, SplitSpec,
};
use crate::synth::{generate_regime_series, RegimeGenParams};
use crate::transfer::{
    apply_locked, detect_negative_transfer, fine_tune_unlocked, map_columns, TransferMode,
    TransferPlan, TransferReport,
};
use crate::tuner::{trials_to_csv, tune, HyperPoint, HyperSpace, TunerConfig};
use crate::linalg::Matrix;

/// What an experiment does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    CycleClassification,
    OutputGapRegression,
    Disaggregation,
    Synth,
}

/// Feature preprocessing applied after loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    #[default]
    Level,
    FirstLogDiff,
    Yoy,
}

/// Model families. The baselines are degenerate network specs trained by
/// the same loop: the logit baseline is a zero-hidden-layer sigmoid
/// network, the linear baseline a zero-hidden-layer identity network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LogitBaseline,
    LinearBaseline,
    Fnn,
    Lstm,
}

/// Hyperparameters used when no tuner block is present (the tuner's best
/// point replaces these).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    #[serde(default = "default_depth")]
    pub dense_depth: usize,
    #[serde(default = "default_units")]
    pub dense_units: usize,
    #[serde(default = "default_units")]
    pub lstm_units: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

fn default_depth() -> usize {
    2
}
fn default_units() -> usize {
    32
}
fn default_lambda() -> f64 {
    1e-3
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_activation() -> Activation {
    Activation::Relu
}

impl Default for ModelSettings {
    fn default() -> ModelSettings {
        ModelSettings {
            dense_depth: default_depth(),
            dense_units: default_units(),
            lstm_units: default_units(),
            lambda: default_lambda(),
            learning_rate: default_learning_rate(),
            activation: default_activation(),
        }
    }
}

impl From<HyperPoint> for ModelSettings {
    fn from(p: HyperPoint) -> ModelSettings {
        ModelSettings {
            dense_depth: p.dense_depth,
            dense_units: p.dense_units,
            lstm_units: p.lstm_units,
            lambda: p.lambda,
            learning_rate: p.learning_rate,
            activation: p.activation,
        }
    }
}

/// Training-loop settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    /// Per-epoch minibatch shuffling; `None` keeps the model default
    /// (shuffle for cross-sectional models, ordered for sequential ones).
    #[serde(default)]
    pub shuffle: Option<bool>,
}

fn default_epochs() -> usize {
    50
}
fn default_batch_size() -> usize {
    32
}

impl Default for TrainSettings {
    fn default() -> TrainSettings {
        TrainSettings {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            optimizer: OptimizerKind::default(),
            shuffle: None,
        }
    }
}

/// Hyperband settings; presence of this block turns tuning on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerSettings {
    #[serde(default = "default_max_resource")]
    pub max_resource: usize,
    #[serde(default = "default_eta")]
    pub eta: usize,
    /// Epochs for the final retraining of the winning configuration.
    #[serde(default = "default_epochs")]
    pub retrain_epochs: usize,
    /// Search grid; the built-in grid when omitted.
    #[serde(default)]
    pub space: Option<HyperSpace>,
    /// Worker-thread cap; also capped by the MACROXFER_THREADS variable.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_max_resource() -> usize {
    10
}
fn default_eta() -> usize {
    3
}

impl Default for TunerSettings {
    fn default() -> TunerSettings {
        TunerSettings {
            max_resource: default_max_resource(),
            eta: default_eta(),
            retrain_epochs: default_epochs(),
            space: None,
            threads: None,
        }
    }
}

/// Which disaggregation engine the `disaggregation` task runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisaggMethod {
    Chowlin,
    Ride,
}

impl std::fmt::Display for DisaggMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DisaggMethod::Chowlin => "chowlin",
            DisaggMethod::Ride => "ride",
        })
    }
}

/// Inputs of the `disaggregation` task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisaggSettings {
    /// Quarterly target CSV (date plus one value column).
    pub target: String,
    /// Monthly indicators CSV.
    pub indicators: String,
    pub method: DisaggMethod,
    #[serde(default = "default_aggregation")]
    pub aggregation: AggregationMode,
    #[serde(default)]
    pub rho: RhoSpec,
    #[serde(default)]
    pub quarterly_eval: QuarterlyAggregate,
    /// Output file name (inside output_dir).
    #[serde(default = "default_disagg_out")]
    pub out: String,
}

fn default_aggregation() -> AggregationMode {
    AggregationMode::Flow
}
fn default_disagg_out() -> String {
    "monthly.csv".into()
}

/// Inputs of the `synth` task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSettings {
    #[serde(default = "default_synth_n")]
    pub n: usize,
    #[serde(default = "default_synth_out")]
    pub out: String,
}

fn default_synth_n() -> usize {
    400
}
fn default_synth_out() -> String {
    "synth.csv".into()
}

impl Default for SynthSettings {
    fn default() -> SynthSettings {
        SynthSettings {
            n: default_synth_n(),
            out: default_synth_out(),
        }
    }
}

/// One experiment, fully described. The first CSV column is always the
/// date column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    /// Features-plus-label CSV for the supervised tasks.
    #[serde(default)]
    pub data: Option<String>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    /// Sampling frequency of `data`; quarterly unless stated.
    #[serde(default)]
    pub frequency: Option<Frequency>,
    #[serde(default)]
    pub transform: TransformKind,
    #[serde(default)]
    pub model: Option<ModelKind>,
    /// Sequence length for sequential models (ignored by cross-sectional
    /// ones).
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub model_settings: ModelSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub tuner: Option<TunerSettings>,
    #[serde(default)]
    pub transfer: Option<TransferPlan>,
    #[serde(default)]
    pub disagg: Option<DisaggSettings>,
    #[serde(default)]
    pub synth: Option<SynthSettings>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_label_column() -> String {
    "label".into()
}
fn default_window() -> usize {
    4
}
fn default_output_dir() -> String {
    ".".into()
}

impl ExperimentConfig {
    /// Read and validate a config file.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Reject invalid task/model/transform combinations before any data is
    /// touched.
    pub fn validate(&self) -> Result<()> {
        let supervised = matches!(
            self.task,
            TaskKind::CycleClassification | TaskKind::OutputGapRegression
        );
        if supervised {
            if self.data.is_none() {
                return Err(Error::config("supervised tasks need a data path"));
            }
            if self.disagg.is_some() || self.synth.is_some() {
                return Err(Error::config(
                    "disagg/synth blocks do not belong to a supervised task",
                ));
            }
            let model = self
                .model
                .ok_or_else(|| Error::config("supervised tasks need a model"))?;
            match (self.task, model) {
                (TaskKind::CycleClassification, ModelKind::LinearBaseline) => {
                    return Err(Error::config(
                        "the linear baseline is a regression model; \
                         classification uses logit_baseline, fnn, or lstm",
                    ));
                }
                (TaskKind::OutputGapRegression, ModelKind::LogitBaseline) => {
                    return Err(Error::config(
                        "the logit baseline is a classification model; \
                         regression uses linear_baseline, fnn, or lstm",
                    ));
                }
                _ => {}
            }
            let is_baseline =
                matches!(model, ModelKind::LogitBaseline | ModelKind::LinearBaseline);
            if is_baseline && self.tuner.is_some() {
                return Err(Error::config("baselines are fixed models; drop the tuner block"));
            }
            if is_baseline && self.transfer.is_some() {
                return Err(Error::config(
                    "transfer applies to fnn or lstm models, not baselines",
                ));
            }
            if self.transfer.is_some() && self.tuner.is_some() {
                return Err(Error::config(
                    "a transferred network is already built; drop the tuner block",
                ));
            }
            if self.window == 0 {
                return Err(Error::config("window must be at least 1"));
            }
            if model != ModelKind::Lstm && self.window != default_window() && self.window != 1 {
                return Err(Error::config(
                    "window only applies to the lstm model; remove it",
                ));
            }
        } else {
            for (name, absent) in [
                ("data", self.data.is_none()),
                ("model", self.model.is_none()),
                ("tuner", self.tuner.is_none()),
                ("transfer", self.transfer.is_none()),
            ] {
                if !absent {
                    return Err(Error::config(format!(
                        "{name} does not apply to the {} task",
                        serde_token(&self.task)
                    )));
                }
            }
            match self.task {
                TaskKind::Disaggregation => {
                    let block = self.disagg.as_ref().ok_or_else(|| {
                        Error::config("the disaggregation task needs a disagg block")
                    })?;
                    if self.synth.is_some() {
                        return Err(Error::config(
                            "synth block does not belong to a disaggregation task",
                        ));
                    }
                    match (block.method, self.transform) {
                        (DisaggMethod::Chowlin, TransformKind::Level) => {}
                        (DisaggMethod::Chowlin, _) => {
                            return Err(Error::config(
                                "the GLS disaggregator works on levels; set transform = level",
                            ));
                        }
                        (DisaggMethod::Ride, TransformKind::FirstLogDiff) => {
                            return Err(Error::config(
                                "the neural interpolator supports level or yoy transforms",
                            ));
                        }
                        (DisaggMethod::Ride, _) => {}
                    }
                }
                TaskKind::Synth => {
                    if self.disagg.is_some() {
                        return Err(Error::config(
                            "disagg block does not belong to a synth task",
                        ));
                    }
                    if self.transform != TransformKind::Level {
                        return Err(Error::config(
                            "the synth task emits raw generated data; set transform = level",
                        ));
                    }
                }
                _ => unreachable!("supervised handled above"),
            }
        }
        if !(0.0..1.0).contains(&self.split.test_fraction)
            || !(0.0..1.0).contains(&self.split.val_fraction)
        {
            return Err(Error::config(format!(
                "split fractions must lie in [0, 1): test {}, val {}",
                self.split.test_fraction, self.split.val_fraction
            )));
        }
        if let Some(t) = &self.tuner {
            if t.max_resource == 0 {
                return Err(Error::config("max_resource must be at least 1"));
            }
            if t.eta < 2 {
                return Err(Error::config("eta must be at least 2"));
            }
            if t.retrain_epochs == 0 {
                return Err(Error::config("retrain_epochs must be at least 1"));
            }
            if let Some(space) = &t.space {
                space.validate()?;
            }
        }
        Ok(())
    }
}

fn serde_token<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value)
        .unwrap_or_default()
        .trim_matches('"')
        .to_string()
}

/// Parse the MACROXFER_THREADS variable (unset means no cap).
pub fn thread_cap_from_env() -> Result<Option<usize>> {
    match std::env::var("MACROXFER_THREADS") {
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                Error::config(format!(
                    "MACROXFER_THREADS must be a positive integer, got \"{raw}\""
                ))
            })?;
            if n == 0 {
                return Err(Error::config(
                    "MACROXFER_THREADS must be a positive integer, got \"0\"",
                ));
            }
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::config(format!("MACROXFER_THREADS: {e}"))),
    }
}

fn combine_caps(a: Option<usize>, b: Option<usize>) -> Option<usize> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Everything a finished run reports back.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub metrics: Option<MetricReport>,
    /// Files written, in creation order.
    pub files: Vec<PathBuf>,
}

/// Execute a validated config end to end and write its artifact files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let out_dir = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Error::config(format!("cannot create {}: {e}", out_dir.display())))?;
    match config.task {
        TaskKind::Synth => run_synth(config, &out_dir),
        TaskKind::Disaggregation => run_disaggregation(config, &out_dir),
        TaskKind::CycleClassification | TaskKind::OutputGapRegression => {
            run_supervised(config, &out_dir)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))
}

fn run_synth(config: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let settings = config.synth.clone().unwrap_or_default();
    let (frame, labels) = generate_regime_series(config.seed, settings.n, &RegimeGenParams::default())?;
    // Append the label column to the feature frame.
    let values = frame.values();
    let combined = Matrix::from_fn(values.rows(), values.cols() + 1, |r, c| {
        if c < values.cols() {
            values.at(r, c)
        } else {
            labels[r]
        }
    });
    let mut columns = frame.columns().to_vec();
    columns.push("label".into());
    let with_labels = SeriesFrame::from_parts(frame.start(), columns, combined)?;
    let path = out_dir.join(&settings.out);
    with_labels.write_csv(&path)?;
    Ok(RunArtifacts {
        metrics: None,
        files: vec![path],
    })
}

fn run_disaggregation(config: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let settings = config
        .disagg
        .as_ref()
        .expect("validated: disagg block present");
    let target_frame =
        SeriesFrame::load_csv(Path::new(&settings.target), Frequency::Quarterly)?.trim_missing()?;
    if target_frame.columns().len() != 1 {
        return Err(Error::data(format!(
            "the quarterly target file must hold exactly one value column, found {}",
            target_frame.columns().len()
        )));
    }
    let indicators =
        SeriesFrame::load_csv(Path::new(&settings.indicators), Frequency::Monthly)?
            .trim_missing()?;
    if indicators.start() != target_frame.start().first_month() {
        return Err(Error::data(format!(
            "the monthly indicators start at {} but the target's first quarter begins {}",
            indicators.start(),
            target_frame.start().first_month()
        )));
    }
    let y_q = target_frame.column(&target_frame.columns()[0].clone())?;

    let (estimates, first_period) = match settings.method {
        DisaggMethod::Chowlin => {
            let problem = DisaggregationProblem {
                y_q,
                x_m: indicators.values().clone(),
                mode: settings.aggregation,
                rho: settings.rho,
            };
            (chow_lin(&problem)?.y_m, indicators.start())
        }
        DisaggMethod::Ride => {
            let ride_config = RideConfig {
                spec: NetworkSpec {
                    input_width: indicators.columns().len(),
                    lstm: None,
                    lstm_candidate: Default::default(),
                    dense_depth: config.model_settings.dense_depth,
                    dense_units: config.model_settings.dense_units,
                    hidden_activation: config.model_settings.activation,
                    output_activation: Activation::Identity,
                    dropout_rate: 0.0,
                    output_bias: 0.0,
                    regularization: Regularization {
                        kind: RegKind::L1,
                        lambda: config.model_settings.lambda,
                    },
                },
                train: TrainConfig {
                    loss: LossKind::Mse,
                    optimizer: config.train.optimizer,
                    learning_rate: config.model_settings.learning_rate,
                    batch_size: config.train.batch_size,
                    epochs: config.train.epochs,
                    seed: config.seed,
                    shuffle: config.train.shuffle,
                    objective: Objective::MinValMse,
                },
                transform: match config.transform {
                    TransformKind::Level => RideTransform::Level,
                    TransformKind::Yoy => RideTransform::Yoy,
                    TransformKind::FirstLogDiff => unreachable!("rejected by validate"),
                },
                quarterly_eval: settings.quarterly_eval,
                val_fraction: config.split.val_fraction,
            };
            let outcome = ride_train(&ride_config, &indicators, &y_q)?;
            let first = indicators.start().plus(outcome.months_dropped);
            (outcome.fitted, first)
        }
    };

    let mut csv = String::from("date,estimate,method\n");
    let mut period = first_period;
    for value in &estimates {
        csv.push_str(&format!("{period},{value:.6},{}\n", settings.method));
        period = period.next();
    }
    let path = out_dir.join(&settings.out);
    write_text(&path, &csv)?;
    Ok(RunArtifacts {
        metrics: None,
        files: vec![path],
    })
}

/// The supervised data, fully prepared: transformed features, aligned
/// labels, window/sample geometry, split, and scaler-fit rows.
struct PreparedData {
    frame: SeriesFrame,
    labels: Vec<f64>,
    window: usize,
    samples: SampleSet,
    train_idx: Vec<usize>,
    val_idx: Vec<usize>,
    test_idx: Vec<usize>,
    /// Feature rows covered by training-sample windows (scaler domain).
    fit_rows: Vec<usize>,
    initial_bias: f64,
}

fn prepare_supervised(config: &ExperimentConfig) -> Result<PreparedData> {
    let model = config.model.expect("validated: model present");
    let frequency = config.frequency.unwrap_or(Frequency::Quarterly);
    let path = config.data.as_ref().expect("validated: data present");
    let raw = SeriesFrame::load_csv(Path::new(path), frequency)?.trim_missing()?;
    let labels_all = raw.column(&config.label_column)?;
    let features = raw.drop_column(&config.label_column)?;

    let transformed = match config.transform {
        TransformKind::Level => features,
        TransformKind::FirstLogDiff => features.log_first_difference()?,
        TransformKind::Yoy => features.yoy_change()?,
    };
    let dropped = labels_all.len() - transformed.values().rows();
    let labels: Vec<f64> = labels_all[dropped..].to_vec();

    let classification = config.task == TaskKind::CycleClassification;
    let initial_bias = if classification {
        let stats = label_stats(&labels)?;
        stats.initial_bias
    } else {
        for (i, l) in labels.iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::data(format!(
                    "label at transformed row {i} is not finite"
                )));
            }
        }
        0.0
    };

    let window = if model == ModelKind::Lstm {
        config.window
    } else {
        1
    };
    let rows = transformed.values().rows();
    if rows < window {
        return Err(Error::data(format!(
            "{rows} rows cannot fill a window of {window}"
        )));
    }
    let n_samples = rows - window + 1;
    let bundle = split(n_samples, &config.split)?;

    // The scaler sees exactly the feature rows that training windows touch.
    let fit_rows: Vec<usize> = bundle
        .train
        .iter()
        .flat_map(|&s| s..s + window)
        .collect::<BTreeSet<usize>>()
        .into_iter()
        .collect();
    let scaler = ScalerParams::fit(transformed.values(), Some(&fit_rows))?;
    let scaled = scaler.transform(transformed.values());
    let feature_rows: Vec<Vec<f64>> = (0..rows).map(|r| scaled.row(r).to_vec()).collect();
    let samples = SampleSet::from_windows(&feature_rows, &labels, window)?;

    Ok(PreparedData {
        frame: transformed,
        labels,
        window,
        samples,
        train_idx: bundle.train,
        val_idx: bundle.val,
        test_idx: bundle.test,
        fit_rows,
        initial_bias,
    })
}

/// Build the network spec for a model kind under this task's conventions:
/// classification nets end in a sigmoid with the class-imbalance bias and
/// weight decay; regression nets end in an identity output with sparse
/// regularization; baselines have no hidden layers and no regularizer.
fn build_spec(
    task: TaskKind,
    model: ModelKind,
    settings: &ModelSettings,
    input_width: usize,
    initial_bias: f64,
) -> NetworkSpec {
    let classification = task == TaskKind::CycleClassification;
    let output_activation = if classification {
        Activation::Sigmoid
    } else {
        Activation::Identity
    };
    let output_bias = if classification { initial_bias } else { 0.0 };
    let baseline = matches!(model, ModelKind::LogitBaseline | ModelKind::LinearBaseline);
    let regularization = if baseline {
        Regularization {
            kind: RegKind::None,
            lambda: 0.0,
        }
    } else {
        Regularization {
            kind: if classification { RegKind::L2 } else { RegKind::L1 },
            lambda: settings.lambda,
        }
    };
    let dropout_rate = match (classification, model) {
        (true, ModelKind::Fnn) => 0.5,
        (true, ModelKind::Lstm) => 0.3,
        _ => 0.0,
    };
    NetworkSpec {
        input_width,
        lstm: if model == ModelKind::Lstm {
            Some(LstmSpec {
                units: settings.lstm_units,
            })
        } else {
            None
        },
        lstm_candidate: Default::default(),
        dense_depth: if baseline { 0 } else { settings.dense_depth },
        dense_units: settings.dense_units,
        hidden_activation: settings.activation,
        output_activation,
        dropout_rate,
        output_bias,
        regularization,
    }
}

fn build_train_config(
    task: TaskKind,
    settings: &ModelSettings,
    train: &TrainSettings,
    epochs: usize,
    seed: u64,
) -> TrainConfig {
    let classification = task == TaskKind::CycleClassification;
    TrainConfig {
        loss: if classification {
            LossKind::Bce
        } else {
            LossKind::Mse
        },
        optimizer: train.optimizer,
        learning_rate: settings.learning_rate,
        batch_size: train.batch_size,
        epochs,
        seed,
        shuffle: train.shuffle,
        objective: if classification {
            Objective::MaxValAuc
        } else {
            Objective::MinValMse
        },
    }
}

fn eval_task(task: TaskKind) -> Task {
    if task == TaskKind::CycleClassification {
        Task::Classification
    } else {
        Task::Regression
    }
}

fn score_header(task: TaskKind) -> &'static str {
    if task == TaskKind::CycleClassification {
        "score"
    } else {
        "estimate"
    }
}

fn predictions_csv(
    task: TaskKind,
    frame: &SeriesFrame,
    window: usize,
    sample_indices: &[usize],
    scores: &[f64],
    labels: &[f64],
) -> String {
    let mut csv = format!("date,{},label\n", score_header(task));
    for (&idx, score) in sample_indices.iter().zip(scores) {
        let period = frame.period_at(window - 1 + idx);
        csv.push_str(&format!("{period},{score:.6},{:.6}\n", labels[idx]));
    }
    csv
}

fn empty_history_csv() -> String {
    TrainHistory::default().to_csv_string()
}

fn run_supervised(config: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    if let Some(plan) = &config.transfer {
        return run_transfer(config, plan, out_dir);
    }
    let data = prepare_supervised(config)?;
    let model = config.model.expect("validated: model present");
    let input_width = data.frame.columns().len();
    let train_set = data.samples.select(&data.train_idx)?;
    let val_set = data.samples.select(&data.val_idx)?;
    let test_set = data.samples.select(&data.test_idx)?;

    let mut files = Vec::new();
    let mut settings = config.model_settings;
    let mut epochs = config.train.epochs;

    // Hyperband, when configured, picks the hyperparameters.
    if let Some(tuner_settings) = &config.tuner {
        let space = tuner_settings.space.clone().unwrap_or_default();
        let tuner_config = TunerConfig {
            max_resource: tuner_settings.max_resource,
            eta: tuner_settings.eta,
            objective: build_train_config(config.task, &settings, &config.train, 0, 0).objective,
            seed: config.seed,
            threads: combine_caps(tuner_settings.threads, thread_cap_from_env()?),
        };
        let task = config.task;
        let train_cfg_template = config.train;
        let bias = data.initial_bias;
        let outcome = tune(
            &space,
            &tuner_config,
            &train_set,
            &val_set,
            |point: &HyperPoint, seed: u64| {
                let trial_settings = ModelSettings::from(*point);
                let spec = build_spec(task, model, &trial_settings, input_width, bias);
                let net = Network::init(&spec, seed)?;
                let cfg =
                    build_train_config(task, &trial_settings, &train_cfg_template, 0, seed);
                Ok((Trainer::new(net, cfg.optimizer), cfg))
            },
        )?;
        let trials_path = out_dir.join("trials.csv");
        write_text(&trials_path, &trials_to_csv(&outcome.records)?)?;
        files.push(trials_path);
        settings = ModelSettings::from(outcome.best);
        epochs = tuner_settings.retrain_epochs;
    }

    // Final training run.
    let spec = build_spec(config.task, model, &settings, input_width, data.initial_bias);
    let cfg = build_train_config(config.task, &settings, &config.train, epochs, config.seed);
    let net = Network::init(&spec, config.seed)?;
    let mut trainer = Trainer::new(net, cfg.optimizer);
    trainer.run(&train_set, &val_set, &cfg, cfg.epochs, None)?;

    let scores = predict(&trainer.net, &test_set)?;
    let report = match eval_task(config.task) {
        Task::Classification => MetricReport::classification(&scores, test_set.labels())?,
        Task::Regression => MetricReport::regression(&scores, test_set.labels())?,
    };

    let metrics_path = out_dir.join("metrics.json");
    write_text(&metrics_path, &report.to_json_string())?;
    files.push(metrics_path);

    let history_path = out_dir.join("history.csv");
    write_text(&history_path, &trainer.history.to_csv_string())?;
    files.push(history_path);

    let predictions_path = out_dir.join("predictions.csv");
    write_text(
        &predictions_path,
        &predictions_csv(
            config.task,
            &data.frame,
            data.window,
            &data.test_idx,
            &scores,
            &data.labels[data.window - 1..],
        ),
    )?;
    files.push(predictions_path);

    let model_path = out_dir.join("model.json");
    trainer.net.save(&model_path)?;
    files.push(model_path);

    Ok(RunArtifacts {
        metrics: Some(report),
        files,
    })
}

fn run_transfer(
    config: &ExperimentConfig,
    plan: &TransferPlan,
    out_dir: &Path,
) -> Result<RunArtifacts> {
    let data = prepare_supervised(config)?;
    let source = Network::load(Path::new(&plan.source))?;
    let raw_rows: Vec<Vec<f64>> = (0..data.frame.values().rows())
        .map(|r| data.frame.values().row(r).to_vec())
        .collect();
    plan.validate(&source, data.frame.columns().len())?;

    let mut files = Vec::new();
    let (report, history_csv, predictions) = match plan.mode {
        TransferMode::Locked => {
            // The whole target frame is out-of-sample; only the scaler is
            // refit, on the training rows.
            let scores = apply_locked(&source, plan, &raw_rows, &data.fit_rows, data.window)?;
            let labels = &data.labels[data.window - 1..];
            let report = match eval_task(config.task) {
                Task::Classification => MetricReport::classification(&scores, labels)?,
                Task::Regression => MetricReport::regression(&scores, labels)?,
            };
            let all_indices: Vec<usize> = (0..scores.len()).collect();
            let csv = predictions_csv(
                config.task,
                &data.frame,
                data.window,
                &all_indices,
                &scores,
                labels,
            );
            let model_path = out_dir.join("model.json");
            source.save(&model_path)?;
            files.push(model_path);
            (report, empty_history_csv(), csv)
        }
        TransferMode::Unlocked => {
            // Remap columns into source input order, rescale on target
            // training rows, fine-tune, and judge on the test split.
            let mapped = map_columns(&raw_rows, &plan.feature_map)?;
            let scaled = crate::transfer::rescale(&mapped, &data.fit_rows)?;
            let labels = data.labels.clone();
            let windows = SampleSet::from_windows(&scaled, &labels, data.window)?;
            let train_set = windows.select(&data.train_idx)?;
            let val_set = windows.select(&data.val_idx)?;
            let test_set = windows.select(&data.test_idx)?;
            let cfg = build_train_config(
                config.task,
                &config.model_settings,
                &config.train,
                config.train.epochs,
                config.seed,
            );
            let (tuned, history) =
                fine_tune_unlocked(source, plan, &train_set, &val_set, &cfg)?;
            let scores = predict(&tuned, &test_set)?;
            let report = match eval_task(config.task) {
                Task::Classification => {
                    MetricReport::classification(&scores, test_set.labels())?
                }
                Task::Regression => MetricReport::regression(&scores, test_set.labels())?,
            };
            let csv = predictions_csv(
                config.task,
                &data.frame,
                data.window,
                &data.test_idx,
                &scores,
                &labels[data.window - 1..],
            );
            let model_path = out_dir.join("model.json");
            tuned.save(&model_path)?;
            files.push(model_path);
            (report, history.to_csv_string(), csv)
        }
    };

    let metrics_path = out_dir.join("metrics.json");
    write_text(&metrics_path, &report.to_json_string())?;
    files.push(metrics_path);
    let history_path = out_dir.join("history.csv");
    write_text(&history_path, &history_csv)?;
    files.push(history_path);
    let predictions_path = out_dir.join("predictions.csv");
    write_text(&predictions_path, &predictions)?;
    files.push(predictions_path);

    Ok(RunArtifacts {
        metrics: Some(report),
        files,
    })
}

/// Run a transfer config AND a target-only baseline of the same family,
/// then compare them on the identical test rows. Artifacts: the transfer
/// run's files plus `baseline_metrics.json` and `transfer_report.json`.
pub fn run_transfer_comparison(
    config: &ExperimentConfig,
) -> Result<(RunArtifacts, TransferReport)> {
    config.validate()?;
    let plan = config
        .transfer
        .clone()
        .ok_or_else(|| Error::config("the transfer command needs a transfer block"))?;
    if plan.mode == TransferMode::Locked {
        // The locked model sees the full frame; judge both models on the
        // test split so the comparison is apples to apples.
        return locked_comparison(config, &plan);
    }
    let mut artifacts = run_experiment(config)?;
    let transfer_report_metrics = artifacts
        .metrics
        .clone()
        .expect("supervised runs always produce metrics");

    // Target-only baseline: same config, no transfer block.
    let mut baseline_config = config.clone();
    baseline_config.transfer = None;
    let baseline_dir = PathBuf::from(&config.output_dir).join("baseline");
    baseline_config.output_dir = baseline_dir.to_string_lossy().into_owned();
    let baseline_artifacts = run_experiment(&baseline_config)?;
    let baseline_metrics = baseline_artifacts
        .metrics
        .expect("supervised runs always produce metrics");

    let objective = if config.task == TaskKind::CycleClassification {
        Objective::MaxValAuc
    } else {
        Objective::MinValMse
    };
    let report = detect_negative_transfer(&transfer_report_metrics, &baseline_metrics, objective)?;
    let out_dir = PathBuf::from(&config.output_dir);
    write_comparison_files(&out_dir, &report, &mut artifacts)?;
    artifacts.files.extend(baseline_artifacts.files);
    Ok((artifacts, report))
}

fn locked_comparison(
    config: &ExperimentConfig,
    plan: &TransferPlan,
) -> Result<(RunArtifacts, TransferReport)> {
    // Run the locked transfer for its artifacts (full-frame predictions).
    let mut artifacts = run_experiment(config)?;

    // Score the locked model on the test split only, for the comparison.
    let data = prepare_supervised(config)?;
    let source = Network::load(Path::new(&plan.source))?;
    let raw_rows: Vec<Vec<f64>> = (0..data.frame.values().rows())
        .map(|r| data.frame.values().row(r).to_vec())
        .collect();
    let all_scores = apply_locked(&source, plan, &raw_rows, &data.fit_rows, data.window)?;
    let labels = &data.labels[data.window - 1..];
    let test_scores: Vec<f64> = data.test_idx.iter().map(|&i| all_scores[i]).collect();
    let test_labels: Vec<f64> = data.test_idx.iter().map(|&i| labels[i]).collect();
    let transfer_metrics = match eval_task(config.task) {
        Task::Classification => MetricReport::classification(&test_scores, &test_labels)?,
        Task::Regression => MetricReport::regression(&test_scores, &test_labels)?,
    };

    let mut baseline_config = config.clone();
    baseline_config.transfer = None;
    let baseline_dir = PathBuf::from(&config.output_dir).join("baseline");
    baseline_config.output_dir = baseline_dir.to_string_lossy().into_owned();
    let baseline_artifacts = run_experiment(&baseline_config)?;
    let baseline_metrics = baseline_artifacts
        .metrics
        .expect("supervised runs always produce metrics");

    let objective = if config.task == TaskKind::CycleClassification {
        Objective::MaxValAuc
    } else {
        Objective::MinValMse
    };
    let report = detect_negative_transfer(&transfer_metrics, &baseline_metrics, objective)?;
    let out_dir = PathBuf::from(&config.output_dir);
    write_comparison_files(&out_dir, &report, &mut artifacts)?;
    artifacts.files.extend(baseline_artifacts.files);
    Ok((artifacts, report))
}

fn write_comparison_files(
    out_dir: &Path,
    report: &TransferReport,
    artifacts: &mut RunArtifacts,
) -> Result<()> {
    let baseline_path = out_dir.join("baseline_metrics.json");
    write_text(&baseline_path, &report.baseline.to_json_string())?;
    artifacts.files.push(baseline_path);

    let indent = |json: &str| -> String {
        json.trim_end()
            .lines()
            .enumerate()
            .map(|(i, line)| {
                if i == 0 {
                    line.to_string()
                } else {
                    format!("  {line}")
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let text = format!(
        "{{\n  \"negative_transfer\": {},\n  \"target\": {},\n  \"baseline\": {}\n}}\n",
        report.negative_transfer,
        indent(&report.target.to_json_string()),
        indent(&report.baseline.to_json_string()),
    );
    let report_path = out_dir.join("transfer_report.json");
    write_text(&report_path, &text)?;
    artifacts.files.push(report_path);
    Ok(())
}

/// Recompute metrics from a predictions CSV (`date,score,label` for
/// classification, `date,estimate,label` for regression — detected from
/// the header).
pub fn evaluate_predictions_csv(path: &Path) -> Result<MetricReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::data(format!("{}: empty file", path.display())))?;
    let task = match header {
        "date,score,label" => Task::Classification,
        "date,estimate,label" => Task::Regression,
        other => {
            return Err(Error::data(format!(
                "{}: unrecognized header \"{other}\"; expected \
                 date,score,label or date,estimate,label",
                path.display()
            )));
        }
    };
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::data(format!(
                "{}: row {} has {} fields, expected 3",
                path.display(),
                i + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::data(format!("{}: row {}: bad number \"{s}\"", path.display(), i + 2)))
        };
        scores.push(parse(fields[1])?);
        labels.push(parse(fields[2])?);
    }
    match task {
        Task::Classification => MetricReport::classification(&scores, &labels),
        Task::Regression => MetricReport::regression(&scores, &labels),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disagg::quarterly_aggregate;
    use crate::series::Period;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tempfile::TempDir;

    fn minimal_classification_config(data: &str, out: &str) -> ExperimentConfig {
        ExperimentConfig {
            task: TaskKind::CycleClassification,
            data: Some(data.into()),
            label_column: "label".into(),
            frequency: Some(Frequency::Quarterly),
            transform: TransformKind::Level,
            model: Some(ModelKind::Fnn),
            window: 4,
            split: SplitSpec::default(),
            model_settings: ModelSettings {
                dense_depth: 1,
                dense_units: 8,
                lstm_units: 8,
                lambda: 1e-4,
                learning_rate: 1e-2,
                activation: Activation::Tanh,
            },
            train: TrainSettings {
                epochs: 5,
                batch_size: 16,
                optimizer: OptimizerKind::Adam,
                shuffle: None,
            },
            tuner: None,
            transfer: None,
            disagg: None,
            synth: None,
            seed: 5,
            output_dir: out.into(),
        }
    }

    #[test]
    fn validation_rejects_task_model_mismatches() {
        let mut config = minimal_classification_config("x.csv", ".");
        config.model = Some(ModelKind::LinearBaseline);
        assert_eq!(config.validate().unwrap_err().exit_code(), 1);

        let mut config = minimal_classification_config("x.csv", ".");
        config.task = TaskKind::OutputGapRegression;
        config.model = Some(ModelKind::LogitBaseline);
        assert_eq!(config.validate().unwrap_err().exit_code(), 1);

        let mut config = minimal_classification_config("x.csv", ".");
        config.model = Some(ModelKind::LogitBaseline);
        config.tuner = Some(TunerSettings::default());
        assert!(config.validate().is_err());

        let mut config = minimal_classification_config("x.csv", ".");
        config.model = None;
        assert!(config.validate().is_err());

        let mut config = minimal_classification_config("x.csv", ".");
        config.data = None;
        assert!(config.validate().is_err());

        // Synth task must not carry supervised blocks.
        let config = ExperimentConfig {
            task: TaskKind::Synth,
            data: Some("x.csv".into()),
            ..minimal_classification_config("x.csv", ".")
        };
        assert!(config.validate().is_err());

        let mut config = minimal_classification_config("x.csv", ".");
        config.task = TaskKind::Disaggregation;
        config.data = None;
        config.model = None;
        assert!(config.validate().is_err()); // missing disagg block
    }

    #[test]
    fn validation_pins_disagg_transforms() {
        let base = DisaggSettings {
            target: "t.csv".into(),
            indicators: "i.csv".into(),
            method: DisaggMethod::Chowlin,
            aggregation: AggregationMode::Flow,
            rho: RhoSpec::Estimate,
            quarterly_eval: QuarterlyAggregate::Mean,
            out: "m.csv".into(),
        };
        let mut config = ExperimentConfig {
            task: TaskKind::Disaggregation,
            data: None,
            model: None,
            disagg: Some(base.clone()),
            ..minimal_classification_config("unused.csv", ".")
        };
        config.tuner = None;
        config.transfer = None;
        assert!(config.validate().is_ok());

        config.transform = TransformKind::Yoy;
        assert!(config.validate().is_err()); // chowlin needs levels

        config.disagg = Some(DisaggSettings {
            method: DisaggMethod::Ride,
            ..base.clone()
        });
        assert!(config.validate().is_ok()); // ride + yoy fine

        config.transform = TransformKind::FirstLogDiff;
        assert!(config.validate().is_err());
    }

    fn write_classification_csv(dir: &Path, rows: usize) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut csv = String::from("date,a,b,label\n");
        let mut period = Period::quarterly(1980, 1).unwrap();
        for _ in 0..rows {
            let label = f64::from(rng.gen_bool(0.3));
            let a: f64 = rng.gen_range(-1.0..1.0) + label * 1.5;
            let b: f64 = rng.gen_range(-1.0..1.0) - label * 1.5;
            csv.push_str(&format!("{period},{a:.6},{b:.6},{label:.0}\n"));
            period = period.next();
        }
        let path = dir.join("cycle.csv");
        std::fs::write(&path, csv).unwrap();
        path.to_string_lossy().into_owned()
    }

    #[test]
    fn classification_run_writes_all_artifacts_deterministically() {
        let dir = TempDir::new().unwrap();
        let data = write_classification_csv(dir.path(), 80);
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        let mut config =
            minimal_classification_config(&data, &out_a.to_string_lossy());
        let artifacts = run_experiment(&config).unwrap();
        let report = artifacts.metrics.unwrap();
        assert!(report.auc.is_some());
        assert!(report.confusion.is_some());
        for name in ["metrics.json", "history.csv", "predictions.csv", "model.json"] {
            assert!(out_a.join(name).exists(), "{name} missing");
        }

        config.output_dir = out_b.to_string_lossy().into_owned();
        run_experiment(&config).unwrap();
        for name in ["metrics.json", "history.csv", "predictions.csv", "model.json"] {
            let a = std::fs::read(out_a.join(name)).unwrap();
            let b = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }

        // Predictions row count equals the test-split size.
        let predictions = std::fs::read_to_string(out_a.join("predictions.csv")).unwrap();
        let n_rows = predictions.lines().count() - 1;
        let n_samples = 80; // window 1 for fnn
        let bundle = split(n_samples, &SplitSpec::default()).unwrap();
        assert_eq!(n_rows, bundle.test.len());
    }

    #[test]
    fn logit_baseline_is_a_depth_zero_network() {
        let dir = TempDir::new().unwrap();
        let data = write_classification_csv(dir.path(), 60);
        let mut config = minimal_classification_config(
            &data,
            &dir.path().join("logit").to_string_lossy(),
        );
        config.model = Some(ModelKind::LogitBaseline);
        config.train.epochs = 200;
        let artifacts = run_experiment(&config).unwrap();
        assert!(artifacts.metrics.unwrap().auc.unwrap() > 0.5);
        let net = Network::load(&dir.path().join("logit").join("model.json")).unwrap();
        assert_eq!(net.hidden.len(), 0);
        assert_eq!(net.spec.output_activation, Activation::Sigmoid);
    }

    #[test]
    fn lstm_run_consumes_windows() {
        let dir = TempDir::new().unwrap();
        let data = write_classification_csv(dir.path(), 70);
        let out = dir.path().join("lstm");
        let mut config = minimal_classification_config(&data, &out.to_string_lossy());
        config.model = Some(ModelKind::Lstm);
        config.window = 3;
        config.train.epochs = 2;
        let artifacts = run_experiment(&config).unwrap();
        assert!(artifacts.metrics.unwrap().auc.is_some());
        // 70 rows, window 3 → 68 samples; the predictions CSV covers the
        // test split of that sample space.
        let predictions = std::fs::read_to_string(out.join("predictions.csv")).unwrap();
        let bundle = split(68, &SplitSpec::default()).unwrap();
        assert_eq!(predictions.lines().count() - 1, bundle.test.len());
        // Dates start no earlier than the third period.
        let second_line = predictions.lines().nth(1).unwrap();
        assert!(second_line.starts_with("19"));
    }

    fn write_regression_csv(dir: &Path, rows: usize) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut csv = String::from("date,a,b,label\n");
        let mut period = Period::quarterly(1975, 1).unwrap();
        for _ in 0..rows {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let y = 0.6 * a - 1.2 * b + 0.3;
            csv.push_str(&format!("{period},{a:.6},{b:.6},{y:.6}\n"));
            period = period.next();
        }
        let path = dir.join("gap.csv");
        std::fs::write(&path, csv).unwrap();
        path.to_string_lossy().into_owned()
    }

    #[test]
    fn linear_baseline_fits_linear_data() {
        let dir = TempDir::new().unwrap();
        let data = write_regression_csv(dir.path(), 90);
        let out = dir.path().join("linear");
        let mut config = minimal_classification_config(&data, &out.to_string_lossy());
        config.task = TaskKind::OutputGapRegression;
        config.model = Some(ModelKind::LinearBaseline);
        config.train.epochs = 500;
        config.model_settings.learning_rate = 1e-2;
        let artifacts = run_experiment(&config).unwrap();
        let report = artifacts.metrics.unwrap();
        assert!(report.mae.unwrap() < 1e-3, "mae {}", report.mae.unwrap());
        let net = Network::load(&out.join("model.json")).unwrap();
        assert_eq!(net.hidden.len(), 0);
        assert_eq!(net.spec.output_activation, Activation::Identity);
    }

    #[test]
    fn synth_task_writes_a_deterministic_csv() {
        let dir = TempDir::new().unwrap();
        let config = ExperimentConfig {
            task: TaskKind::Synth,
            data: None,
            model: None,
            synth: Some(SynthSettings {
                n: 50,
                out: "synth.csv".into(),
            }),
            seed: 7,
            ..minimal_classification_config("unused.csv", &dir.path().to_string_lossy())
        };
        let a = run_experiment(&config).unwrap();
        let text_a = std::fs::read_to_string(&a.files[0]).unwrap();
        let header = text_a.lines().next().unwrap();
        assert!(header.starts_with("date,"));
        assert!(header.ends_with(",label"));
        assert_eq!(text_a.lines().count(), 51);
        let b = run_experiment(&config).unwrap();
        assert_eq!(text_a, std::fs::read_to_string(&b.files[0]).unwrap());
    }

    fn write_disagg_inputs(dir: &Path) -> (String, String) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let months = 36;
        let mut indicators = String::from("date,x1,x2\n");
        let mut period = Period::monthly(2000, 1).unwrap();
        let mut x = Vec::new();
        for _ in 0..months {
            let a: f64 = rng.gen_range(0.5..2.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            indicators.push_str(&format!("{period},{a:.6},{b:.6}\n"));
            x.push((a, b));
            period = period.next();
        }
        let mut target = String::from("date,gdp\n");
        let mut qperiod = Period::quarterly(2000, 1).unwrap();
        for q in 0..months / 3 {
            let total: f64 = (0..3)
                .map(|m| {
                    let (a, b) = x[3 * q + m];
                    2.0 * a - 0.5 * b + 0.1
                })
                .sum();
            target.push_str(&format!("{qperiod},{total:.6}\n"));
            qperiod = qperiod.next();
        }
        let ipath = dir.join("indicators.csv");
        let tpath = dir.join("target.csv");
        std::fs::write(&ipath, indicators).unwrap();
        std::fs::write(&tpath, target).unwrap();
        (
            tpath.to_string_lossy().into_owned(),
            ipath.to_string_lossy().into_owned(),
        )
    }

    #[test]
    fn disaggregation_task_emits_a_consistent_monthly_csv() {
        let dir = TempDir::new().unwrap();
        let (target, indicators) = write_disagg_inputs(dir.path());
        let config = ExperimentConfig {
            task: TaskKind::Disaggregation,
            data: None,
            model: None,
            disagg: Some(DisaggSettings {
                target: target.clone(),
                indicators,
                method: DisaggMethod::Chowlin,
                aggregation: AggregationMode::Flow,
                rho: RhoSpec::Fixed(0.5),
                quarterly_eval: QuarterlyAggregate::Mean,
                out: "monthly.csv".into(),
            }),
            ..minimal_classification_config("unused.csv", &dir.path().to_string_lossy())
        };
        let mut config = config;
        config.tuner = None;
        config.transfer = None;
        config.transform = TransformKind::Level;
        let artifacts = run_experiment(&config).unwrap();
        let text = std::fs::read_to_string(&artifacts.files[0]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "date,estimate,method");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 36);
        assert!(rows[0].starts_with("2000-01,"));
        assert!(rows.iter().all(|r| r.ends_with(",chowlin")));

        // Quarterly sums of the estimates reproduce the target file.
        let estimates: Vec<f64> = rows
            .iter()
            .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        let sums = quarterly_aggregate(&estimates, QuarterlyAggregate::Sum);
        let target_text = std::fs::read_to_string(&target).unwrap();
        for (line, sum) in target_text.lines().skip(1).zip(&sums) {
            let y: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!((y - sum).abs() < 2e-6, "quarter {y} vs {sum}");
        }
    }

    #[test]
    fn tuned_classification_writes_a_trial_log() {
        let dir = TempDir::new().unwrap();
        let data = write_classification_csv(dir.path(), 80);
        let out = dir.path().join("tuned");
        let mut config = minimal_classification_config(&data, &out.to_string_lossy());
        config.tuner = Some(TunerSettings {
            max_resource: 3,
            eta: 3,
            retrain_epochs: 5,
            space: Some(HyperSpace {
                dense_depth: vec![1],
                dense_units: vec![8, 16],
                lstm_units: vec![8],
                lambda: vec![1e-4],
                learning_rate: vec![1e-2, 1e-3],
                activation: vec![Activation::Tanh],
            }),
            threads: Some(1),
        });
        let artifacts = run_experiment(&config).unwrap();
        assert!(out.join("trials.csv").exists());
        let trials = std::fs::read_to_string(out.join("trials.csv")).unwrap();
        assert!(trials.starts_with("bracket,rung,trial,"));
        assert!(trials.lines().count() > 1);
        assert!(artifacts.metrics.unwrap().auc.is_some());
    }

    #[test]
    fn transfer_comparison_produces_a_report() {
        let dir = TempDir::new().unwrap();
        let data = write_classification_csv(dir.path(), 80);

        // Train a source model and save it.
        let source_out = dir.path().join("source");
        let config = minimal_classification_config(&data, &source_out.to_string_lossy());
        run_experiment(&config).unwrap();
        let source_path = source_out.join("model.json");

        // Locked transfer back onto the same data (identity feature map).
        let transfer_out = dir.path().join("locked");
        let mut transfer_config =
            minimal_classification_config(&data, &transfer_out.to_string_lossy());
        transfer_config.transfer = Some(TransferPlan {
            source: source_path.to_string_lossy().into_owned(),
            mode: TransferMode::Locked,
            lock_mask: None,
            feature_map: vec![0, 1],
        });
        let (artifacts, report) = run_transfer_comparison(&transfer_config).unwrap();
        assert!(transfer_out.join("transfer_report.json").exists());
        assert!(transfer_out.join("baseline_metrics.json").exists());
        assert!(transfer_out.join("baseline").join("metrics.json").exists());
        assert!(artifacts.metrics.is_some());
        // Same data, same settings: metrics must be close, flag defined.
        assert!(report.target.auc.is_some());
        assert!(report.baseline.auc.is_some());

        // The locked source parameters were not modified by the run.
        let saved = std::fs::read_to_string(&source_path).unwrap();
        let roundtrip =
            std::fs::read_to_string(transfer_out.join("model.json")).unwrap();
        assert_eq!(saved, roundtrip);
    }

    #[test]
    fn unlocked_transfer_fine_tunes_on_the_target() {
        let dir = TempDir::new().unwrap();
        let data = write_classification_csv(dir.path(), 80);
        let source_out = dir.path().join("source");
        let config = minimal_classification_config(&data, &source_out.to_string_lossy());
        run_experiment(&config).unwrap();

        let out = dir.path().join("unlocked");
        let mut transfer_config = minimal_classification_config(&data, &out.to_string_lossy());
        transfer_config.train.epochs = 3;
        transfer_config.transfer = Some(TransferPlan {
            source: source_out.join("model.json").to_string_lossy().into_owned(),
            mode: TransferMode::Unlocked,
            lock_mask: None,
            feature_map: vec![0, 1],
        });
        let artifacts = run_experiment(&transfer_config).unwrap();
        assert!(artifacts.metrics.unwrap().auc.is_some());
        let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
        assert_eq!(history.lines().count(), 1 + 3);
        // Fine-tuned model differs from the source.
        let source_json = std::fs::read_to_string(source_out.join("model.json")).unwrap();
        let tuned_json = std::fs::read_to_string(out.join("model.json")).unwrap();
        assert_ne!(source_json, tuned_json);
    }

    #[test]
    fn eval_reads_back_predictions() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("predictions.csv");
        std::fs::write(
            &path,
            "date,score,label\n2001-Q1,0.900000,1.000000\n2001-Q2,0.100000,0.000000\n\
             2001-Q3,0.800000,1.000000\n2001-Q4,0.300000,0.000000\n",
        )
        .unwrap();
        let report = evaluate_predictions_csv(&path).unwrap();
        assert_eq!(report.auc, Some(1.0));

        let regression = dir.path().join("gap.csv");
        std::fs::write(
            &regression,
            "date,estimate,label\n2001-Q1,1.500000,1.000000\n2001-Q2,2.500000,3.000000\n",
        )
        .unwrap();
        let report = evaluate_predictions_csv(&regression).unwrap();
        assert_eq!(report.mae, Some(0.5));

        std::fs::write(&path, "date,foo,label\n").unwrap();
        assert!(evaluate_predictions_csv(&path).is_err());
    }

    #[test]
    fn thread_cap_combination() {
        assert_eq!(combine_caps(None, None), None);
        assert_eq!(combine_caps(Some(4), None), Some(4));
        assert_eq!(combine_caps(None, Some(2)), Some(2));
        assert_eq!(combine_caps(Some(4), Some(2)), Some(2));
        assert_eq!(combine_caps(Some(1), Some(8)), Some(1));
    }

    #[test]
    fn config_files_round_trip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            r#"{
                "task": "cycle_classification",
                "data": "cycle.csv",
                "model": "fnn",
                "transform": "first_log_diff",
                "seed": 9
            }"#,
        )
        .unwrap();
        let config = ExperimentConfig::load(&path).unwrap();
        assert_eq!(config.task, TaskKind::CycleClassification);
        assert_eq!(config.model, Some(ModelKind::Fnn));
        assert_eq!(config.transform, TransformKind::FirstLogDiff);
        assert_eq!(config.label_column, "label");
        assert_eq!(config.window, 4);
        assert_eq!(config.split.test_fraction, 0.4);
        assert_eq!(config.seed, 9);

        std::fs::write(&path, r#"{"task": "synth", "model": "fnn"}"#).unwrap();
        let err = ExperimentConfig::load(&path).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
