//! Hyperband hyperparameter search: random sampling over a finite grid,
//! bracketed successive halving with cumulative epoch budgets, and a
//! deterministic trial log.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Activation;
use crate::optim::{Objective, SampleSet, TrainConfig, Trainer};

/// The finite hyperparameter grid searched by the tuner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperSpace {
    pub dense_depth: Vec<usize>,
    pub dense_units: Vec<usize>,
    pub lstm_units: Vec<usize>,
    pub lambda: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub activation: Vec<Activation>,
}

impl Default for HyperSpace {
    /// Depths 1-4; hidden and LSTM units 16..=256 in steps of 16; lambda and
    /// learning rate over three decades; three hidden activations.
    fn default() -> HyperSpace {
        let units: Vec<usize> = (1..=16).map(|k| 16 * k).collect();
        HyperSpace {
            dense_depth: vec![1, 2, 3, 4],
            dense_units: units.clone(),
            lstm_units: units,
            lambda: vec![1e-4, 1e-3, 1e-2],
            learning_rate: vec![1e-4, 1e-3, 1e-2],
            activation: vec![Activation::Relu, Activation::Tanh, Activation::Sigmoid],
        }
    }
}

impl HyperSpace {
    pub fn validate(&self) -> Result<()> {
        if self.dense_depth.is_empty()
            || self.dense_units.is_empty()
            || self.lstm_units.is_empty()
            || self.lambda.is_empty()
            || self.learning_rate.is_empty()
            || self.activation.is_empty()
        {
            return Err(Error::config("every hyperparameter list must be nonempty"));
        }
        Ok(())
    }
}

/// One sampled grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint {
    pub dense_depth: usize,
    pub dense_units: usize,
    pub lstm_units: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub activation: Activation,
}

/// Uniform draw from each grid dimension; deterministic given the RNG state.
pub fn sample_config<R: Rng>(space: &HyperSpace, rng: &mut R) -> HyperPoint {
    fn pick<T: Copy, R: Rng>(list: &[T], rng: &mut R) -> T {
        list[rng.gen_range(0..list.len())]
    }
    HyperPoint {
        dense_depth: pick(&space.dense_depth, rng),
        dense_units: pick(&space.dense_units, rng),
        lstm_units: pick(&space.lstm_units, rng),
        lambda: pick(&space.lambda, rng),
        learning_rate: pick(&space.learning_rate, rng),
        activation: pick(&space.activation, rng),
    }
}

/// Tuner settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerConfig {
    /// Maximum epochs any single trial may consume (R).
    #[serde(default = "default_max_resource")]
    pub max_resource: usize,
    /// Halving factor between rungs.
    #[serde(default = "default_eta")]
    pub eta: usize,
    pub objective: Objective,
    #[serde(default)]
    pub seed: u64,
    /// Cap on worker threads for rung execution; None uses the global pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_max_resource() -> usize {
    10
}

fn default_eta() -> usize {
    3
}

impl TunerConfig {
    pub fn new(objective: Objective) -> TunerConfig {
        TunerConfig {
            max_resource: default_max_resource(),
            eta: default_eta(),
            objective,
            seed: 0,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_resource == 0 {
            return Err(Error::config("max_resource must be at least 1"));
        }
        if self.eta < 2 {
            return Err(Error::config("eta must be at least 2"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads must be at least 1 when set"));
        }
        Ok(())
    }
}

/// One rung of a bracket: how many trials run and the cumulative epoch
/// budget each must have consumed by the end of the rung.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rung {
    pub n_trials: usize,
    pub epochs: usize,
}

/// One successive-halving bracket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bracket {
    /// Bracket id (s), from s_max down to 0.
    pub s: usize,
    pub rungs: Vec<Rung>,
}

/// The bracket table: s_max = floor(log_eta R); bracket s starts
/// n = ceil((s_max+1) * eta^s / (s+1)) trials at r = R * eta^(-s) epochs and
/// halves s times, keeping floor(n_i/eta) trials with eta-times the resource
/// per rung. Rung budgets are cumulative epochs, floored to at least 1.
pub fn hyperband_schedule(max_resource: usize, eta: usize) -> Result<Vec<Bracket>> {
    if max_resource == 0 {
        return Err(Error::config("max_resource must be at least 1"));
    }
    if eta < 2 {
        return Err(Error::config("eta must be at least 2"));
    }
    let mut s_max = 0usize;
    let mut power = 1usize;
    while power * eta <= max_resource {
        power *= eta;
        s_max += 1;
    }
    let mut brackets = Vec::with_capacity(s_max + 1);
    for s in (0..=s_max).rev() {
        let eta_s = eta.pow(s as u32);
        let n = ((s_max + 1) * eta_s + s) / (s + 1); // ceil division
        let mut rungs = Vec::with_capacity(s + 1);
        for i in 0..=s {
            let n_i = n / eta.pow(i as u32);
            let epochs = (max_resource / eta.pow((s - i) as u32)).max(1);
            rungs.push(Rung {
                n_trials: n_i,
                epochs,
            });
        }
        brackets.push(Bracket { s, rungs });
    }
    Ok(brackets)
}

/// Total epochs the schedule consumes under cumulative (resume) budgets:
/// each rung charges its surviving trials only the epochs beyond the
/// previous rung.
pub fn schedule_total_epochs(brackets: &[Bracket]) -> usize {
    let mut total = 0;
    for bracket in brackets {
        let mut previous = 0;
        for rung in &bracket.rungs {
            total += rung.n_trials * (rung.epochs - previous);
            previous = rung.epochs;
        }
    }
    total
}

/// One (trial, rung) row of the tuning log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub bracket: usize,
    pub rung: usize,
    pub trial: usize,
    pub config: HyperPoint,
    /// Cumulative epochs this trial has consumed.
    pub epochs: usize,
    /// Validation objective at this rung; NaN marks a failed trial.
    pub objective: f64,
    /// Failure diagnostic, empty for successful evaluations.
    pub note: String,
}

/// Everything a tuning run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best: HyperPoint,
    pub best_objective: f64,
    pub records: Vec<TrialRecord>,
    pub epochs_consumed: usize,
}

/// Render the trial log as CSV (lambda/learning rate/objective at six
/// decimals; failed objectives left empty).
pub fn trials_to_csv(records: &[TrialRecord]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "bracket",
            "rung",
            "trial",
            "dense_depth",
            "dense_units",
            "lstm_units",
            "lambda",
            "learning_rate",
            "activation",
            "epochs",
            "objective",
            "note",
        ])
        .map_err(|e| Error::data(format!("trial log write failed: {e}")))?;
    for r in records {
        let objective = if r.objective.is_finite() {
            format!("{:.6}", r.objective)
        } else {
            String::new()
        };
        writer
            .write_record([
                r.bracket.to_string(),
                r.rung.to_string(),
                r.trial.to_string(),
                r.config.dense_depth.to_string(),
                r.config.dense_units.to_string(),
                r.config.lstm_units.to_string(),
                format!("{:.6}", r.config.lambda),
                format!("{:.6}", r.config.learning_rate),
                r.config.activation.to_string(),
                r.epochs.to_string(),
                objective,
                r.note.clone(),
            ])
            .map_err(|e| Error::data(format!("trial log write failed: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::data(format!("trial log write failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::data(format!("trial log not UTF-8: {e}")))
}

struct TrialSlot {
    id: usize,
    point: HyperPoint,
    seed: u64,
    trainer: Option<Trainer>,
    cfg: Option<TrainConfig>,
    failed: Option<String>,
    epochs_run: usize,
    objective: f64,
}

/// Run Hyperband. The factory builds a fresh [`Trainer`] and its
/// [`TrainConfig`] for a sampled grid point and per-trial seed; the tuner
/// owns scheduling, resumption, halving, and logging. Deterministic given
/// `config.seed`, including under any `threads` setting.
pub fn tune<F>(
    space: &HyperSpace,
    config: &TunerConfig,
    train: &SampleSet,
    val: &SampleSet,
    factory: F,
) -> Result<TuneOutcome>
where
    F: Fn(&HyperPoint, u64) -> Result<(Trainer, TrainConfig)> + Sync,
{
    space.validate()?;
    config.validate()?;
    let run = || tune_serial(space, config, train, val, &factory);
    match config.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::config(format!("cannot build a {k}-thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn tune_serial<F>(
    space: &HyperSpace,
    config: &TunerConfig,
    train: &SampleSet,
    val: &SampleSet,
    factory: &F,
) -> Result<TuneOutcome>
where
    F: Fn(&HyperPoint, u64) -> Result<(Trainer, TrainConfig)> + Sync,
{
    let schedule = hyperband_schedule(config.max_resource, config.eta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records: Vec<TrialRecord> = Vec::new();
    let mut epochs_consumed = 0usize;
    let mut next_trial_id = 0usize;

    for bracket in &schedule {
        // Draw every trial's configuration and seed up front, on one thread,
        // so parallel execution cannot perturb the stream.
        let mut alive: Vec<TrialSlot> = (0..bracket.rungs[0].n_trials)
            .map(|_| {
                let point = sample_config(space, &mut rng);
                let seed = rng.gen::<u64>();
                let id = next_trial_id;
                next_trial_id += 1;
                TrialSlot {
                    id,
                    point,
                    seed,
                    trainer: None,
                    cfg: None,
                    failed: None,
                    epochs_run: 0,
                    objective: f64::NAN,
                }
            })
            .collect();

        for (rung_idx, rung) in bracket.rungs.iter().enumerate() {
            let target = rung.epochs;
            let run_epochs: Vec<usize> = alive
                .par_iter_mut()
                .map(|slot| {
                    if slot.failed.is_some() {
                        return 0;
                    }
                    if slot.trainer.is_none() {
                        match factory(&slot.point, slot.seed) {
                            Ok((trainer, cfg)) => {
                                slot.trainer = Some(trainer);
                                slot.cfg = Some(cfg);
                            }
                            Err(e) => {
                                slot.failed = Some(e.to_string());
                                return 0;
                            }
                        }
                    }
                    let trainer = slot.trainer.as_mut().expect("trainer built above");
                    let cfg = slot.cfg.as_ref().expect("config built above");
                    let before = trainer.epochs_done;
                    let extra = target.saturating_sub(before);
                    match trainer.run(train, val, cfg, extra, None) {
                        Ok(()) => {
                            slot.epochs_run = trainer.epochs_done;
                            slot.objective = trainer
                                .last_val_objective()
                                .unwrap_or(f64::NAN);
                        }
                        Err(e) => {
                            slot.failed = Some(e.to_string());
                            slot.epochs_run = trainer.epochs_done;
                            slot.objective = f64::NAN;
                        }
                    }
                    trainer.epochs_done - before
                })
                .collect();
            epochs_consumed += run_epochs.iter().sum::<usize>();

            for slot in &alive {
                records.push(TrialRecord {
                    bracket: bracket.s,
                    rung: rung_idx,
                    trial: slot.id,
                    config: slot.point,
                    epochs: slot.epochs_run,
                    objective: if slot.failed.is_some() {
                        f64::NAN
                    } else {
                        slot.objective
                    },
                    note: slot.failed.clone().unwrap_or_default(),
                });
            }

            if rung_idx + 1 < bracket.rungs.len() {
                let keep = bracket.rungs[rung_idx + 1].n_trials;
                alive.sort_by(|a, b| rank_order(config.objective, a, b));
                alive.truncate(keep);
                // Restore id order so later logs read in trial order.
                alive.sort_by_key(|s| s.id);
            }
        }
    }

    let mut best: Option<&TrialRecord> = None;
    for record in &records {
        if !record.objective.is_finite() {
            continue;
        }
        match best {
            Some(b) if !config.objective.better(record.objective, b.objective) => {}
            _ => best = Some(record),
        }
    }
    match best {
        Some(record) => Ok(TuneOutcome {
            best: record.config,
            best_objective: record.objective,
            records,
            epochs_consumed,
        }),
        None => {
            let mut notes: Vec<&str> = records
                .iter()
                .filter(|r| !r.note.is_empty())
                .map(|r| r.note.as_str())
                .collect();
            notes.dedup();
            Err(Error::training(format!(
                "every tuning trial failed; diagnostics: {}",
                notes.join(" | ")
            )))
        }
    }
}

/// Survivor ordering: better objective first; failed trials after every
/// finite one; ties broken by lower trial index.
fn rank_order(objective: Objective, a: &TrialSlot, b: &TrialSlot) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    let a_ok = a.failed.is_none() && a.objective.is_finite();
    let b_ok = b.failed.is_none() && b.objective.is_finite();
    match (a_ok, b_ok) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => a.id.cmp(&b.id),
        (true, true) => {
            if objective.better(a.objective, b.objective) {
                Ordering::Less
            } else if objective.better(b.objective, a.objective) {
                Ordering::Greater
            } else {
                a.id.cmp(&b.id)
            }
        }
    }
}
