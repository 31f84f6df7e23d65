//! Adam and AdaGrad parameter updates, the minibatch training loop with
//! optional layer freezing and resumable epoch budgets, per-epoch history,
//! and post-training evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::{backward, NetworkGrads};
use crate::loss::{loss, validate_target, LossKind};
use crate::metrics::{self, MetricReport};
use crate::network::{Network, Phase};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const OPTIMIZER_EPS: f64 = 1e-8;
pub const DEFAULT_BATCH_SIZE: usize = 32;

/// Training examples as (sequence, label) pairs. Dense networks use
/// length-one sequences; LSTM networks use fixed-length windows.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    samples: Vec<Vec<Vec<f64>>>,
    labels: Vec<f64>,
}

impl SampleSet {
    /// One sample per row (length-one sequences), for dense networks.
    pub fn from_rows(features: &[Vec<f64>], labels: &[f64]) -> Result<SampleSet> {
        let samples = features.iter().map(|r| vec![r.clone()]).collect();
        SampleSet::from_sequences(samples, labels.to_vec())
    }

    /// Sliding windows of `window` consecutive rows; the label of each
    /// window is the label of its last row. Produces n - window + 1 samples.
    pub fn from_windows(
        features: &[Vec<f64>],
        labels: &[f64],
        window: usize,
    ) -> Result<SampleSet> {
        if window == 0 {
            return Err(Error::config("window must be at least 1"));
        }
        if window > features.len() {
            return Err(Error::data(format!(
                "window {} exceeds row count {}",
                window,
                features.len()
            )));
        }
        if features.len() != labels.len() {
            return Err(Error::data(format!(
                "features ({}) and labels ({}) differ in length",
                features.len(),
                labels.len()
            )));
        }
        let samples: Vec<Vec<Vec<f64>>> = (window - 1..features.len())
            .map(|i| features[i + 1 - window..=i].to_vec())
            .collect();
        let labels = labels[window - 1..].to_vec();
        SampleSet::from_sequences(samples, labels)
    }

    /// General constructor; validates rectangular shapes and finite values.
    pub fn from_sequences(samples: Vec<Vec<Vec<f64>>>, labels: Vec<f64>) -> Result<SampleSet> {
        if samples.len() != labels.len() {
            return Err(Error::data(format!(
                "samples ({}) and labels ({}) differ in length",
                samples.len(),
                labels.len()
            )));
        }
        let width = samples
            .first()
            .and_then(|s| s.first())
            .map(|r| r.len())
            .unwrap_or(0);
        for (i, sample) in samples.iter().enumerate() {
            if sample.is_empty() {
                return Err(Error::data(format!("sample {i} has no rows")));
            }
            for row in sample {
                if row.len() != width {
                    return Err(Error::data(format!(
                        "sample {i} row width {} differs from {}",
                        row.len(),
                        width
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::data(format!("sample {i} contains a non-finite value")));
                }
            }
        }
        if let Some(l) = labels.iter().find(|l| !l.is_finite()) {
            return Err(Error::data(format!("non-finite label {l}")));
        }
        Ok(SampleSet { samples, labels })
    }

    /// Subset in the order given by `indices`.
    pub fn select(&self, indices: &[usize]) -> Result<SampleSet> {
        let mut samples = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.samples.len() {
                return Err(Error::data(format!(
                    "sample index {i} out of range ({} samples)",
                    self.samples.len()
                )));
            }
            samples.push(self.samples[i].clone());
            labels.push(self.labels[i]);
        }
        Ok(SampleSet { samples, labels })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Vec<Vec<f64>>] {
        &self.samples
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Adagrad,
}

/// Per-parameter optimizer accumulators, shaped like the network's blocks.
/// Adam keeps first and second moments; AdaGrad keeps only the squared sum
/// (stored in `v`, with `m` empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    kind: OptimizerKind,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, net: &Network) -> OptimizerState {
        let shapes: Vec<Vec<f64>> = (0..net.n_blocks())
            .map(|i| vec![0.0; net.block(i).len()])
            .collect();
        OptimizerState {
            kind,
            t: 0,
            m: match kind {
                OptimizerKind::Adam => shapes.clone(),
                OptimizerKind::Adagrad => Vec::new(),
            },
            v: shapes,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Number of optimizer steps taken so far.
    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update on flat slices. `t` is the 1-based step number used for
/// bias correction: m_hat = m/(1-beta1^t), v_hat = v/(1-beta2^t),
/// theta -= lr * m_hat / (sqrt(v_hat) + eps).
pub fn adam_step(theta: &mut [f64], m: &mut [f64], v: &mut [f64], t: u64, g: &[f64], lr: f64) {
    let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
    for i in 0..theta.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + OPTIMIZER_EPS);
    }
}

/// One AdaGrad update on flat slices: G += g^2, theta -= lr*g/(sqrt(G)+eps).
pub fn adagrad_step(theta: &mut [f64], g_acc: &mut [f64], g: &[f64], lr: f64) {
    for i in 0..theta.len() {
        g_acc[i] += g[i] * g[i];
        theta[i] -= lr * g[i] / (g_acc[i].sqrt() + OPTIMIZER_EPS);
    }
}

/// Apply one optimizer step to every parameter block of the network.
pub fn optimizer_step(
    net: &mut Network,
    state: &mut OptimizerState,
    grads: &NetworkGrads,
    lr: f64,
) -> Result<()> {
    if grads.n_blocks() != net.n_blocks() {
        return Err(Error::training(format!(
            "gradient blocks ({}) do not match network blocks ({})",
            grads.n_blocks(),
            net.n_blocks()
        )));
    }
    if state.v.len() != net.n_blocks() {
        return Err(Error::training(format!(
            "optimizer state blocks ({}) do not match network blocks ({})",
            state.v.len(),
            net.n_blocks()
        )));
    }
    for i in 0..net.n_blocks() {
        if state.v[i].len() != net.block(i).len() || grads.block(i).len() != net.block(i).len() {
            return Err(Error::training(format!(
                "shape mismatch in parameter block {i}"
            )));
        }
    }
    state.t += 1;
    for i in 0..net.n_blocks() {
        let g = grads.block(i);
        match state.kind {
            OptimizerKind::Adam => {
                adam_step(net.block_mut(i), &mut state.m[i], &mut state.v[i], state.t, g, lr);
            }
            OptimizerKind::Adagrad => {
                adagrad_step(net.block_mut(i), &mut state.v[i], g, lr);
            }
        }
    }
    Ok(())
}

/// What a training or tuning run optimizes on the validation split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize validation AUC (classification).
    MaxValAuc,
    /// Minimize validation mean squared error (regression).
    MinValMse,
    /// Minimize mean validation loss under the configured loss kind.
    MinValLoss,
}

impl Objective {
    pub fn is_maximizing(self) -> bool {
        matches!(self, Objective::MaxValAuc)
    }

    /// Strictly-better comparison in the objective's direction; non-finite
    /// values (failed evaluations) rank below everything.
    pub fn better(self, candidate: f64, incumbent: f64) -> bool {
        if !candidate.is_finite() {
            return false;
        }
        if !incumbent.is_finite() {
            return true;
        }
        if self.is_maximizing() {
            candidate > incumbent
        } else {
            candidate < incumbent
        }
    }

    /// Evaluate this objective for a network on a sample set.
    pub fn value(self, net: &Network, set: &SampleSet, kind: LossKind) -> Result<f64> {
        match self {
            Objective::MaxValAuc => {
                let scores = predict(net, set)?;
                metrics::auc(&scores, set.labels())
            }
            Objective::MinValMse => {
                let preds = predict(net, set)?;
                let n = preds.len() as f64;
                Ok(preds
                    .iter()
                    .zip(set.labels())
                    .map(|(p, y)| (p - y) * (p - y))
                    .sum::<f64>()
                    / n)
            }
            Objective::MinValLoss => mean_loss(net, set, kind),
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    /// None lets the network decide: dense runs shuffle sample order each
    /// epoch, LSTM runs keep time order.
    #[serde(default)]
    pub shuffle: Option<bool>,
    pub objective: Objective,
}

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning_rate must be a positive finite number, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// One row of the per-epoch training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_objective: f64,
}

/// Per-epoch curves; `epoch` counts cumulatively across resumed runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_objective\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                r.epoch, r.train_loss, r.val_loss, r.val_objective
            ));
        }
        out
    }
}

/// A resumable training run owning its network and optimizer state. Epoch
/// budgets are cumulative: running 3 epochs and then 6 more is bit-identical
/// to one 9-epoch run with the same config.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub net: Network,
    pub state: OptimizerState,
    pub epochs_done: usize,
    pub history: TrainHistory,
}

impl Trainer {
    pub fn new(net: Network, kind: OptimizerKind) -> Trainer {
        let state = OptimizerState::new(kind, &net);
        Trainer {
            net,
            state,
            epochs_done: 0,
            history: TrainHistory::default(),
        }
    }

    /// Run `epochs` further epochs of minibatch SGD. `frozen` optionally
    /// marks layers (indexed as in [`Network::n_layers`]) whose parameters
    /// must not move.
    pub fn run(
        &mut self,
        train: &SampleSet,
        val: &SampleSet,
        cfg: &TrainConfig,
        epochs: usize,
        frozen: Option<&[bool]>,
    ) -> Result<()> {
        cfg.validate()?;
        if train.is_empty() || val.is_empty() {
            return Err(Error::data("training and validation sets must be nonempty"));
        }
        for label in train.labels().iter().chain(val.labels()) {
            validate_target(cfg.loss, *label)?;
        }
        if let Some(mask) = frozen {
            if mask.len() != self.net.n_layers() {
                return Err(Error::config(format!(
                    "freeze mask length {} does not match layer count {}",
                    mask.len(),
                    self.net.n_layers()
                )));
            }
        }
        let shuffle = cfg.shuffle.unwrap_or(self.net.lstm.is_none());
        let layout = self.net.block_layout();
        for _ in 0..epochs {
            let epoch = self.epochs_done + 1;
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, epoch as u64));
            let mut order: Vec<usize> = (0..train.len()).collect();
            if shuffle {
                order.shuffle(&mut rng);
            }
            for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
                let mut acc = NetworkGrads::zeros_like(&self.net);
                let mut batch_loss = 0.0;
                for &i in batch {
                    let (_, trace) =
                        self.net
                            .forward(&train.samples[i], Phase::Train, &mut rng)?;
                    batch_loss += loss(cfg.loss, cfg.loss.prediction(&trace), train.labels[i]);
                    acc.add_assign(&backward(&self.net, &trace, cfg.loss, train.labels[i]));
                }
                if !batch_loss.is_finite() {
                    return Err(Error::training(format!(
                        "non-finite loss at epoch {epoch}, batch {batch_index}"
                    )));
                }
                acc.scale(1.0 / batch.len() as f64);
                if let Some(mask) = frozen {
                    acc.mask_layers(&layout, mask);
                }
                if !acc.all_finite() {
                    return Err(Error::training(format!(
                        "non-finite gradient at epoch {epoch}, batch {batch_index}"
                    )));
                }
                optimizer_step(&mut self.net, &mut self.state, &acc, cfg.learning_rate)?;
            }
            let train_loss = mean_loss(&self.net, train, cfg.loss)?;
            let val_loss = mean_loss(&self.net, val, cfg.loss)?;
            let val_objective = cfg.objective.value(&self.net, val, cfg.loss)?;
            if !(train_loss.is_finite() && val_loss.is_finite()) {
                return Err(Error::training(format!(
                    "non-finite loss after epoch {epoch}"
                )));
            }
            self.history.epochs.push(EpochRecord {
                epoch,
                train_loss,
                val_loss,
                val_objective,
            });
            self.epochs_done = epoch;
        }
        Ok(())
    }

    /// Best validation objective seen so far, if any epoch has run.
    pub fn best_val_objective(&self, objective: Objective) -> Option<f64> {
        self.history
            .epochs
            .iter()
            .map(|r| r.val_objective)
            .fold(None, |best, v| match best {
                Some(b) if !objective.better(v, b) => Some(b),
                _ => Some(v),
            })
    }

    /// Validation objective at the latest epoch.
    pub fn last_val_objective(&self) -> Option<f64> {
        self.history.epochs.last().map(|r| r.val_objective)
    }
}

/// Train a fresh copy of `net` for `cfg.epochs` epochs.
pub fn train(
    net: &Network,
    train_set: &SampleSet,
    val_set: &SampleSet,
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    let mut trainer = Trainer::new(net.clone(), cfg.optimizer);
    trainer.run(train_set, val_set, cfg, cfg.epochs, None)?;
    Ok((trainer.net, trainer.history))
}

/// Inference-mode predictions for every sample, in order.
pub fn predict(net: &Network, set: &SampleSet) -> Result<Vec<f64>> {
    set.samples.iter().map(|s| net.infer(s)).collect()
}

/// Mean per-sample data loss in inference mode (dropout off, no penalty).
pub fn mean_loss(net: &Network, set: &SampleSet, kind: LossKind) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::data("cannot evaluate loss on an empty set"));
    }
    let ones = vec![1.0; net.pre_output_width()];
    let mut total = 0.0;
    for (sample, label) in set.samples.iter().zip(&set.labels) {
        let (_, trace) = net.forward_with_mask(sample, &ones)?;
        total += loss(kind, kind.prediction(&trace), *label);
    }
    Ok(total / set.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

/// Inference-mode forward pass per sample, then the task's metric bundle.
pub fn evaluate(net: &Network, set: &SampleSet, task: Task) -> Result<MetricReport> {
    let scores = predict(net, set)?;
    match task {
        Task::Classification => MetricReport::classification(&scores, set.labels()),
        Task::Regression => MetricReport::regression(&scores, set.labels()),
    }
}

/// SplitMix64 mix of (seed, epoch) so every epoch draws an independent,
/// reproducible RNG stream regardless of how runs are resumed.
fn mix_seed(seed: u64, epoch: u64) -> u64 {
    let mut z = seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
