//! Classification and regression evaluation: confusion matrix, ROC curve,
//! rank-based AUC, mean absolute error, and Pearson correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion counts at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

/// One point of an ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Default decision threshold for the confusion matrix.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn validate_binary(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::data("scores must be nonempty"));
    }
    if scores.len() != labels.len() {
        return Err(Error::data(format!(
            "scores ({}) and labels ({}) differ in length",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::data(format!("non-finite score {s}")));
    }
    if let Some(l) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
        return Err(Error::data(format!("labels must be 0 or 1, got {l}")));
    }
    Ok(())
}

/// Count outcomes with "predicted positive" defined as score >= threshold.
pub fn confusion(scores: &[f64], labels: &[f64], threshold: f64) -> Result<ConfusionMatrix> {
    validate_binary(scores, labels)?;
    let mut m = ConfusionMatrix {
        tn: 0,
        fp: 0,
        fn_: 0,
        tp: 0,
    };
    for (s, l) in scores.iter().zip(labels) {
        let predicted = *s >= threshold;
        let actual = *l == 1.0;
        match (predicted, actual) {
            (false, false) => m.tn += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (true, true) => m.tp += 1,
        }
    }
    Ok(m)
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability
/// that a uniformly drawn positive outranks a uniformly drawn negative, with
/// ties counting one half. Computed from average ranks in O(n log n);
/// identical to the trapezoidal area under [`roc_curve`].
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    validate_binary(scores, labels)?;
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::data(
            "auc requires at least one positive and one negative label",
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // Average ranks over tie groups (ranks are 1-based).
    let mut rank = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            rank[idx] = avg;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&rank)
        .filter(|(l, _)| **l == 1.0)
        .map(|(_, r)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// ROC curve swept over every distinct score from high to low, starting at
/// the (0, 0) corner with an infinite threshold and ending at (1, 1).
pub fn roc_curve(scores: &[f64], labels: &[f64]) -> Result<Vec<RocPoint>> {
    validate_binary(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::data(
            "roc_curve requires at least one positive and one negative label",
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            tpr: tp as f64 / n_pos as f64,
            fpr: fp as f64 / n_neg as f64,
        });
    }
    Ok(points)
}

/// Mean absolute error.
pub fn mae(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::data("mae requires nonempty input"));
    }
    if predictions.len() != targets.len() {
        return Err(Error::data(format!(
            "predictions ({}) and targets ({}) differ in length",
            predictions.len(),
            targets.len()
        )));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Sample Pearson correlation coefficient. Errors on length < 2 or a
/// constant input, where the coefficient is undefined.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::data(format!(
            "pearson inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::data("pearson requires at least two observations"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::data(
            "pearson is undefined for a constant input",
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Bundle of whichever metrics a task produces. Serialized with fixed
/// 6-decimal floats via [`MetricReport::to_json_string`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson: Option<f64>,
}

impl MetricReport {
    /// AUC plus a default-threshold confusion matrix.
    pub fn classification(scores: &[f64], labels: &[f64]) -> Result<MetricReport> {
        Ok(MetricReport {
            auc: Some(auc(scores, labels)?),
            confusion: Some(confusion(scores, labels, DEFAULT_THRESHOLD)?),
            mae: None,
            pearson: None,
        })
    }

    /// MAE plus Pearson correlation when the latter is defined (constant
    /// predictions leave it out rather than failing the report).
    pub fn regression(predictions: &[f64], targets: &[f64]) -> Result<MetricReport> {
        Ok(MetricReport {
            auc: None,
            confusion: None,
            mae: Some(mae(predictions, targets)?),
            pearson: pearson(predictions, targets).ok(),
        })
    }

    /// Fixed-layout JSON with floats at exactly six decimals.
    pub fn to_json_string(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        if let Some(a) = self.auc {
            parts.push(format!("  \"auc\": {a:.6}"));
        }
        if let Some(c) = &self.confusion {
            parts.push(format!(
                "  \"confusion\": {{\n    \"tn\": {},\n    \"fp\": {},\n    \"fn\": {},\n    \"tp\": {}\n  }}",
                c.tn, c.fp, c.fn_, c.tp
            ));
        }
        if let Some(m) = self.mae {
            parts.push(format!("  \"mae\": {m:.6}"));
        }
        if let Some(p) = self.pearson {
            parts.push(format!("  \"pearson\": {p:.6}"));
        }
        format!("{{\n{}\n}}\n", parts.join(",\n"))
    }
}
