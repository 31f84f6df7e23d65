//! Cross-domain reuse of trained networks: locked application (pure
//! inference on remapped, re-standardized target features) and unlocked
//! fine-tuning (retraining a chosen subset of layers), plus the
//! worse-than-baseline check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::MetricReport;
use crate::network::Network;
use crate::optim::{Objective, SampleSet, TrainConfig, TrainHistory, Trainer};
use crate::series::ScalerParams;

/// Whether transferred parameters stay fixed or some layers retrain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    Locked,
    Unlocked,
}

/// How to reuse a trained network on a new dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    /// Path of the saved source model.
    pub source: String,
    pub mode: TransferMode,
    /// Per-layer freeze flags (`true` = frozen), ordered as in
    /// [`Network::n_layers`]. `None` selects the default for the mode:
    /// everything frozen when locked; everything but the last hidden dense
    /// layer and the output layer frozen when unlocked.
    #[serde(default)]
    pub lock_mask: Option<Vec<bool>>,
    /// `feature_map[i]` is the target column that feeds network input `i`.
    /// Must name distinct columns and cover the network's input width.
    pub feature_map: Vec<usize>,
}

impl TransferPlan {
    /// Check the plan against the network it will drive and the width of
    /// the target feature rows.
    pub fn validate(&self, net: &Network, target_width: usize) -> Result<()> {
        let input_width = net.spec.input_width;
        if self.feature_map.len() != input_width {
            return Err(Error::config(format!(
                "feature_map has {} entries but the network takes {} inputs",
                self.feature_map.len(),
                input_width
            )));
        }
        let mut seen = vec![false; target_width];
        for &col in &self.feature_map {
            if col >= target_width {
                return Err(Error::config(format!(
                    "feature_map names column {col} but the target has only {target_width} columns"
                )));
            }
            if seen[col] {
                return Err(Error::config(format!(
                    "feature_map names column {col} twice"
                )));
            }
            seen[col] = true;
        }
        if let Some(mask) = &self.lock_mask {
            if mask.len() != net.n_layers() {
                return Err(Error::config(format!(
                    "lock_mask has {} entries but the network has {} layers",
                    mask.len(),
                    net.n_layers()
                )));
            }
            match self.mode {
                TransferMode::Locked => {
                    if mask.iter().any(|frozen| !frozen) {
                        return Err(Error::config(
                            "locked mode requires every layer frozen; \
                             the lock_mask unfreezes at least one",
                        ));
                    }
                }
                TransferMode::Unlocked => {
                    if mask.iter().all(|frozen| *frozen) {
                        return Err(Error::config(
                            "unlocked mode needs at least one trainable layer, \
                             but the lock_mask freezes all of them",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// The freeze mask this plan implies for `net`.
    pub fn resolved_mask(&self, net: &Network) -> Vec<bool> {
        match (&self.lock_mask, self.mode) {
            (Some(mask), _) => mask.clone(),
            (None, TransferMode::Locked) => vec![true; net.n_layers()],
            (None, TransferMode::Unlocked) => default_unlock_mask(net),
        }
    }
}

/// The standard fine-tuning mask: freeze everything except the last hidden
/// dense layer (when one exists) and the output layer.
pub fn default_unlock_mask(net: &Network) -> Vec<bool> {
    let n = net.n_layers();
    let mut mask = vec![true; n];
    mask[n - 1] = false;
    if !net.hidden.is_empty() {
        mask[n - 2] = false;
    }
    mask
}

/// An independent, parameter-identical copy; mutating it leaves the source
/// untouched.
pub fn copy_network(source: &Network) -> Network {
    source.clone()
}

/// Reorder target feature rows into network input order:
/// `out[r][i] = rows[r][feature_map[i]]`.
pub fn map_columns(rows: &[Vec<f64>], feature_map: &[usize]) -> Result<Vec<Vec<f64>>> {
    let mut mapped = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let mut out = Vec::with_capacity(feature_map.len());
        for &col in feature_map {
            let value = *row.get(col).ok_or_else(|| {
                Error::data(format!(
                    "row {r} has {} columns; feature_map needs column {col}",
                    row.len()
                ))
            })?;
            out.push(value);
        }
        mapped.push(out);
    }
    Ok(mapped)
}

/// Run a locked plan: remap the target columns, fit a scaler on the rows in
/// `fit_rows`, scale everything, and predict. `window` is the sequence
/// length fed to the network (1 for cross-sectional models); predictions
/// cover rows `window-1..rows.len()` in order. The network is never
/// modified.
pub fn apply_locked(
    net: &Network,
    plan: &TransferPlan,
    rows: &[Vec<f64>],
    fit_rows: &[usize],
    window: usize,
) -> Result<Vec<f64>> {
    if plan.mode != TransferMode::Locked {
        return Err(Error::config(
            "apply_locked requires a plan in locked mode",
        ));
    }
    if window == 0 {
        return Err(Error::config("window must be at least 1"));
    }
    let width = rows.first().map_or(0, Vec::len);
    plan.validate(net, width)?;
    let mapped = map_columns(rows, &plan.feature_map)?;
    if mapped.len() < window {
        return Err(Error::data(format!(
            "need at least {window} rows for a window of {window}, got {}",
            mapped.len()
        )));
    }
    let scaled = rescale(&mapped, fit_rows)?;
    let mut predictions = Vec::with_capacity(scaled.len() - window + 1);
    for end in window - 1..scaled.len() {
        let sample = &scaled[end + 1 - window..=end];
        predictions.push(net.infer(sample)?);
    }
    Ok(predictions)
}

/// Standardize `rows` with moments fit on the subset `fit_rows`.
pub fn rescale(rows: &[Vec<f64>], fit_rows: &[usize]) -> Result<Vec<Vec<f64>>> {
    let width = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    let matrix = Matrix::from_vec(rows.len(), width, flat)?;
    let scaler = ScalerParams::fit(&matrix, Some(fit_rows))?;
    Ok(rows.iter().map(|r| scaler.transform_row(r)).collect())
}

/// Retrain the plan's unfrozen layers on target data. Frozen layers keep
/// their parameters bit-for-bit; `cfg.epochs` may be zero, which leaves the
/// whole network untouched.
pub fn fine_tune_unlocked(
    net: Network,
    plan: &TransferPlan,
    train: &SampleSet,
    val: &SampleSet,
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    if plan.mode != TransferMode::Unlocked {
        return Err(Error::config(
            "fine_tune_unlocked requires a plan in unlocked mode",
        ));
    }
    let mask = plan.resolved_mask(&net);
    if mask.len() != net.n_layers() {
        return Err(Error::config(format!(
            "lock_mask has {} entries but the network has {} layers",
            mask.len(),
            net.n_layers()
        )));
    }
    if mask.iter().all(|frozen| *frozen) {
        return Err(Error::config(
            "unlocked mode needs at least one trainable layer, \
             but the lock_mask freezes all of them",
        ));
    }
    let mut trainer = Trainer::new(net, cfg.optimizer);
    if cfg.epochs > 0 {
        trainer.run(train, val, cfg, cfg.epochs, Some(&mask))?;
    }
    Ok((trainer.net, trainer.history))
}

/// Side-by-side evaluation of a transferred model and a trained-from-target
/// baseline on the same test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub target: MetricReport,
    pub baseline: MetricReport,
    pub negative_transfer: bool,
}

/// Compare a transferred model's metrics with a baseline's under the
/// experiment's objective (AUC when maximizing, MAE when minimizing) and
/// flag the transfer when it is strictly worse. Reports must describe the
/// same test rows: classification reports carry row counts in their
/// confusion matrices and those must agree.
pub fn detect_negative_transfer(
    transfer: &MetricReport,
    baseline: &MetricReport,
    objective: Objective,
) -> Result<TransferReport> {
    match (&transfer.confusion, &baseline.confusion) {
        (Some(t), Some(b)) if t.total() != b.total() => {
            return Err(Error::config(format!(
                "metrics cover different test sets: {} rows vs {} rows",
                t.total(),
                b.total()
            )));
        }
        (Some(_), None) | (None, Some(_)) => {
            return Err(Error::config(
                "cannot compare a classification report with a regression report",
            ));
        }
        _ => {}
    }
    let pick = |report: &MetricReport, name: &str, value: Option<f64>| {
        value.ok_or_else(|| {
            Error::config(format!(
                "report lacks the {name} metric required by the objective: {report:?}"
            ))
        })
    };
    let (t, b) = if objective.is_maximizing() {
        (
            pick(transfer, "auc", transfer.auc)?,
            pick(baseline, "auc", baseline.auc)?,
        )
    } else {
        (
            pick(transfer, "mae", transfer.mae)?,
            pick(baseline, "mae", baseline.mae)?,
        )
    };
    Ok(TransferReport {
        target: transfer.clone(),
        baseline: baseline.clone(),
        negative_transfer: objective.better(b, t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossKind;
    use crate::metrics::ConfusionMatrix;
    use crate::network::{Activation, LstmSpec, NetworkSpec, RegKind, Regularization};
    use crate::optim::OptimizerKind;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense_spec(input_width: usize, depth: usize) -> NetworkSpec {
        NetworkSpec {
            input_width,
            lstm: None,
            lstm_candidate: Default::default(),
            dense_depth: depth,
            dense_units: 6,
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Sigmoid,
            dropout_rate: 0.0,
            output_bias: 0.0,
            regularization: Regularization {
                kind: RegKind::None,
                lambda: 0.0,
            },
        }
    }

    fn lstm_spec(input_width: usize, depth: usize) -> NetworkSpec {
        NetworkSpec {
            lstm: Some(LstmSpec { units: 4 }),
            ..dense_spec(input_width, depth)
        }
    }

    fn random_rows(seed: u64, n: usize, width: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..width).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect()
    }

    fn identity_plan(width: usize, mode: TransferMode) -> TransferPlan {
        TransferPlan {
            source: "source.json".into(),
            mode,
            lock_mask: None,
            feature_map: (0..width).collect(),
        }
    }

    #[test]
    fn copied_network_is_independent_and_byte_identical() {
        let source = Network::init(&dense_spec(3, 2), 7).unwrap();
        let mut copy = copy_network(&source);
        assert_eq!(
            source.to_json_string().unwrap(),
            copy.to_json_string().unwrap()
        );
        let rows = random_rows(1, 100, 3);
        for row in &rows {
            assert_eq!(
                source.infer_row(row).unwrap(),
                copy.infer_row(row).unwrap()
            );
        }
        let before: Vec<f64> = rows.iter().map(|r| source.infer_row(r).unwrap()).collect();
        for w in copy.output.weights.as_mut_slice() {
            *w = 0.0;
        }
        let after: Vec<f64> = rows.iter().map(|r| source.infer_row(r).unwrap()).collect();
        assert_eq!(before, after);
        assert_ne!(
            source.infer_row(&rows[0]).unwrap(),
            copy.infer_row(&rows[0]).unwrap()
        );
    }

    #[test]
    fn locked_application_is_pure_and_leaves_parameters_bit_identical() {
        let net = Network::init(&lstm_spec(3, 1), 11).unwrap();
        let plan = identity_plan(3, TransferMode::Locked);
        let rows = random_rows(2, 40, 3);
        let fit: Vec<usize> = (0..24).collect();
        let before = net.to_json_string().unwrap();
        let a = apply_locked(&net, &plan, &rows, &fit, 4).unwrap();
        let b = apply_locked(&net, &plan, &rows, &fit, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 40 - 4 + 1);
        assert!(a.iter().all(|p| p.is_finite()));
        assert_eq!(net.to_json_string().unwrap(), before);
    }

    #[test]
    fn locked_application_validates_mode_and_map() {
        let net = Network::init(&dense_spec(3, 1), 3).unwrap();
        let rows = random_rows(3, 10, 3);
        let fit: Vec<usize> = (0..6).collect();

        let unlocked = identity_plan(3, TransferMode::Unlocked);
        assert_eq!(
            apply_locked(&net, &unlocked, &rows, &fit, 1)
                .unwrap_err()
                .exit_code(),
            1
        );

        let mut short = identity_plan(3, TransferMode::Locked);
        short.feature_map = vec![0, 1];
        assert!(apply_locked(&net, &short, &rows, &fit, 1).is_err());

        let mut dup = identity_plan(3, TransferMode::Locked);
        dup.feature_map = vec![0, 1, 1];
        assert!(apply_locked(&net, &dup, &rows, &fit, 1).is_err());

        let mut oob = identity_plan(3, TransferMode::Locked);
        oob.feature_map = vec![0, 1, 9];
        assert!(apply_locked(&net, &oob, &rows, &fit, 1).is_err());
    }

    #[test]
    fn locked_mode_rejects_masks_with_unfrozen_layers() {
        let net = Network::init(&dense_spec(2, 1), 5).unwrap();
        let mut plan = identity_plan(2, TransferMode::Locked);
        plan.lock_mask = Some(vec![true, false]);
        assert!(plan.validate(&net, 2).is_err());
        plan.lock_mask = Some(vec![true, true]);
        assert!(plan.validate(&net, 2).is_ok());
        plan.lock_mask = Some(vec![true]);
        assert!(plan.validate(&net, 2).is_err());
    }

    #[test]
    fn permuting_columns_together_with_the_map_changes_nothing() {
        let net = Network::init(&dense_spec(4, 2), 13).unwrap();
        let rows = random_rows(4, 30, 4);
        let fit: Vec<usize> = (0..18).collect();
        let identity = identity_plan(4, TransferMode::Locked);
        let base = apply_locked(&net, &identity, &rows, &fit, 1).unwrap();

        // Permute target columns with sigma; compensate in the map so slot i
        // still reads the original column i.
        let sigma = [2usize, 0, 3, 1]; // column j of the new frame = old column sigma[j]
        let permuted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| sigma.iter().map(|&j| r[j]).collect())
            .collect();
        let mut inverse = vec![0usize; 4];
        for (new_col, &old_col) in sigma.iter().enumerate() {
            inverse[old_col] = new_col;
        }
        let mut plan = identity_plan(4, TransferMode::Locked);
        plan.feature_map = inverse;
        let remapped = apply_locked(&net, &plan, &permuted, &fit, 1).unwrap();
        assert_eq!(base, remapped);
    }

    #[test]
    fn default_unlock_mask_frees_last_hidden_and_output() {
        let lstm_two_hidden = Network::init(&lstm_spec(3, 2), 1).unwrap();
        assert_eq!(
            default_unlock_mask(&lstm_two_hidden),
            vec![true, true, false, false]
        );
        let dense_one_hidden = Network::init(&dense_spec(3, 1), 1).unwrap();
        assert_eq!(default_unlock_mask(&dense_one_hidden), vec![false, false]);
        let dense_no_hidden = Network::init(&dense_spec(3, 0), 1).unwrap();
        assert_eq!(default_unlock_mask(&dense_no_hidden), vec![false]);
        let lstm_no_hidden = Network::init(&lstm_spec(3, 0), 1).unwrap();
        assert_eq!(default_unlock_mask(&lstm_no_hidden), vec![true, false]);
    }

    fn toy_sets(seed: u64, width: usize) -> (SampleSet, SampleSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut make = |n: usize| {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
            let labels: Vec<f64> = rows
                .iter()
                .map(|r| f64::from(r.iter().sum::<f64>() > 0.0))
                .collect();
            SampleSet::from_rows(&rows, &labels).unwrap()
        };
        (make(40), make(16))
    }

    fn bce_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            loss: LossKind::Bce,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-2,
            batch_size: 8,
            epochs,
            seed: 3,
            shuffle: None,
            objective: Objective::MaxValAuc,
        }
    }

    #[test]
    fn fine_tuning_moves_only_the_unfrozen_layers() {
        let net = Network::init(&dense_spec(3, 3), 21).unwrap();
        let plan = identity_plan(3, TransferMode::Unlocked);
        let (train, val) = toy_sets(8, 3);
        let before = net.clone();
        let (tuned, history) =
            fine_tune_unlocked(net, &plan, &train, &val, &bce_config(2)).unwrap();
        assert_eq!(history.epochs.len(), 2);
        // Default mask freezes hidden layers 0 and 1, frees layer 2 + output.
        assert_eq!(
            tuned.hidden[0].weights.as_slice(),
            before.hidden[0].weights.as_slice()
        );
        assert_eq!(
            tuned.hidden[0].bias, before.hidden[0].bias,
        );
        assert_eq!(
            tuned.hidden[1].weights.as_slice(),
            before.hidden[1].weights.as_slice()
        );
        assert_ne!(
            tuned.hidden[2].weights.as_slice(),
            before.hidden[2].weights.as_slice()
        );
        assert_ne!(
            tuned.output.weights.as_slice(),
            before.output.weights.as_slice()
        );
    }

    #[test]
    fn explicit_masks_freeze_exactly_the_marked_layers() {
        let net = Network::init(&lstm_spec(2, 2), 31).unwrap();
        let mut plan = identity_plan(2, TransferMode::Unlocked);
        // Free only the LSTM; freeze all dense layers.
        plan.lock_mask = Some(vec![false, true, true, true]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<Vec<Vec<f64>>> = (0..30)
            .map(|_| {
                (0..4)
                    .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        let labels: Vec<f64> = samples
            .iter()
            .map(|s| f64::from(s[3][0] > 0.0))
            .collect();
        let train = SampleSet::from_sequences(samples[..20].to_vec(), labels[..20].to_vec())
            .unwrap();
        let val =
            SampleSet::from_sequences(samples[20..].to_vec(), labels[20..].to_vec()).unwrap();
        let before = net.clone();
        let (tuned, _) = fine_tune_unlocked(net, &plan, &train, &val, &bce_config(2)).unwrap();
        let lstm_before = before.lstm.as_ref().unwrap();
        let lstm_after = tuned.lstm.as_ref().unwrap();
        assert_ne!(
            lstm_after.forget.input.as_slice(),
            lstm_before.forget.input.as_slice()
        );
        for l in 0..2 {
            assert_eq!(
                tuned.hidden[l].weights.as_slice(),
                before.hidden[l].weights.as_slice()
            );
            assert_eq!(tuned.hidden[l].bias, before.hidden[l].bias);
        }
        assert_eq!(
            tuned.output.weights.as_slice(),
            before.output.weights.as_slice()
        );
        assert_eq!(tuned.output.bias, before.output.bias);
    }

    #[test]
    fn zero_epoch_fine_tune_matches_locked_predictions() {
        let net = Network::init(&dense_spec(3, 2), 17).unwrap();
        let rows = random_rows(9, 30, 3);
        let fit: Vec<usize> = (0..20).collect();
        let locked = identity_plan(3, TransferMode::Locked);
        let locked_preds = apply_locked(&net, &locked, &rows, &fit, 1).unwrap();

        let unlocked = identity_plan(3, TransferMode::Unlocked);
        let (train, val) = toy_sets(10, 3);
        let (tuned, history) =
            fine_tune_unlocked(net.clone(), &unlocked, &train, &val, &bce_config(0)).unwrap();
        assert!(history.epochs.is_empty());
        assert_eq!(
            tuned.to_json_string().unwrap(),
            net.to_json_string().unwrap()
        );
        let scaled = rescale(&rows, &fit).unwrap();
        let tuned_preds: Vec<f64> = scaled
            .iter()
            .map(|r| tuned.infer_row(r).unwrap())
            .collect();
        assert_eq!(locked_preds, tuned_preds);
    }

    #[test]
    fn all_frozen_unlocked_plans_are_rejected() {
        let net = Network::init(&dense_spec(2, 1), 1).unwrap();
        let mut plan = identity_plan(2, TransferMode::Unlocked);
        plan.lock_mask = Some(vec![true, true]);
        let (train, val) = toy_sets(11, 2);
        let err = fine_tune_unlocked(net, &plan, &train, &val, &bce_config(1)).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    fn classification_report(auc: f64, n: usize) -> MetricReport {
        MetricReport {
            auc: Some(auc),
            confusion: Some(ConfusionMatrix {
                tn: n / 2,
                fp: 0,
                fn_: 0,
                tp: n - n / 2,
            }),
            mae: None,
            pearson: None,
        }
    }

    #[test]
    fn worse_auc_is_flagged_and_ties_are_not() {
        let report =
            detect_negative_transfer(
                &classification_report(0.5, 60),
                &classification_report(0.674, 60),
                Objective::MaxValAuc,
            )
            .unwrap();
        assert!(report.negative_transfer);

        let tie = detect_negative_transfer(
            &classification_report(0.674, 60),
            &classification_report(0.674, 60),
            Objective::MaxValAuc,
        )
        .unwrap();
        assert!(!tie.negative_transfer);

        let better = detect_negative_transfer(
            &classification_report(0.817, 60),
            &classification_report(0.674, 60),
            Objective::MaxValAuc,
        )
        .unwrap();
        assert!(!better.negative_transfer);
    }

    #[test]
    fn regression_comparison_uses_mae_with_smaller_better() {
        let make = |mae: f64| MetricReport {
            auc: None,
            confusion: None,
            mae: Some(mae),
            pearson: Some(0.9),
        };
        let worse =
            detect_negative_transfer(&make(1.2), &make(1.0), Objective::MinValMse).unwrap();
        assert!(worse.negative_transfer);
        let better =
            detect_negative_transfer(&make(0.8), &make(1.0), Objective::MinValMse).unwrap();
        assert!(!better.negative_transfer);
    }

    #[test]
    fn mismatched_reports_are_rejected() {
        let err = detect_negative_transfer(
            &classification_report(0.9, 60),
            &classification_report(0.8, 59),
            Objective::MaxValAuc,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);

        let regression = MetricReport {
            auc: None,
            confusion: None,
            mae: Some(1.0),
            pearson: None,
        };
        assert!(detect_negative_transfer(
            &classification_report(0.9, 60),
            &regression,
            Objective::MaxValAuc
        )
        .is_err());

        // Objective metric absent from both reports.
        assert!(detect_negative_transfer(&regression, &regression, Objective::MaxValAuc).is_err());
    }

    #[test]
    fn transfer_plan_round_trips_through_json() {
        let plan = TransferPlan {
            source: "models/source.json".into(),
            mode: TransferMode::Unlocked,
            lock_mask: Some(vec![true, false, false]),
            feature_map: vec![2, 0, 1],
        };
        let json = serde_json::to_string(&plan).unwrap();
        assert!(json.contains("\"unlocked\""));
        let back: TransferPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);

        // lock_mask may be omitted entirely.
        let bare: TransferPlan = serde_json::from_str(
            "{\"source\":\"m.json\",\"mode\":\"locked\",\"feature_map\":[0,1]}",
        )
        .unwrap();
        assert_eq!(bare.lock_mask, None);
        assert_eq!(bare.mode, TransferMode::Locked);
    }
}
