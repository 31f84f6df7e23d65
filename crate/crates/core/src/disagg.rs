//! Temporal disaggregation of a quarterly series by monthly indicators:
//! a GLS estimator with AR(1) errors (including AR-propagated
//! extrapolation and grid-searched autocorrelation), and a neural
//! monthly-interpolation mapper trained on replicated quarterly targets.

use serde::de::Error as SerdeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix, SPD_PIVOT_TOL};
use crate::network::{Network, NetworkSpec};
use crate::optim::{SampleSet, TrainConfig, TrainHistory, Trainer};
use crate::series::{yoy_change, ScalerParams, SeriesFrame};

/// How a quarterly observation relates to its three months: sums for flow
/// variables, the third month's value for stocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    Flow,
    Stock,
}

/// AR(1) coefficient of the monthly error process: either pinned or chosen
/// by maximizing the quarterly GLS log-likelihood over a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoSpec {
    Fixed(f64),
    Estimate,
}

impl Default for RhoSpec {
    fn default() -> RhoSpec {
        RhoSpec::Estimate
    }
}

impl Serialize for RhoSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RhoSpec::Fixed(r) => serializer.serialize_f64(*r),
            RhoSpec::Estimate => serializer.serialize_str("estimate"),
        }
    }
}

impl<'de> Deserialize<'de> for RhoSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<RhoSpec, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(r) => Ok(RhoSpec::Fixed(r)),
            Raw::Text(s) if s == "estimate" => Ok(RhoSpec::Estimate),
            Raw::Text(s) => Err(D::Error::custom(format!(
                "rho must be a number in (-1, 1) or \"estimate\", got \"{s}\""
            ))),
        }
    }
}

/// One disaggregation task: `n` quarterly values and at least `3n` monthly
/// indicator rows (extra trailing rows are extrapolated).
#[derive(Debug, Clone, PartialEq)]
pub struct DisaggregationProblem {
    pub y_q: Vec<f64>,
    pub x_m: Matrix,
    pub mode: AggregationMode,
    pub rho: RhoSpec,
}

impl DisaggregationProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.y_q.len();
        if n == 0 {
            return Err(Error::data("quarterly target is empty"));
        }
        if self.y_q.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("quarterly target contains non-finite values"));
        }
        if self.x_m.cols() == 0 {
            return Err(Error::data("need at least one monthly indicator column"));
        }
        if self.x_m.rows() < 3 * n {
            return Err(Error::data(format!(
                "{} quarters need at least {} monthly rows, got {}",
                n,
                3 * n,
                self.x_m.rows()
            )));
        }
        if !self.x_m.all_finite() {
            return Err(Error::data("monthly indicators contain non-finite values"));
        }
        for c in 0..self.x_m.cols() {
            let first = self.x_m.at(0, c);
            if (1..3 * n).all(|r| self.x_m.at(r, c) == first) {
                return Err(Error::data(format!(
                    "indicator column {c} is constant over the in-sample months"
                )));
            }
        }
        if let RhoSpec::Fixed(r) = self.rho {
            if !(r.is_finite() && r.abs() < 1.0) {
                return Err(Error::config(format!(
                    "rho must lie strictly inside (-1, 1), got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// The fitted disaggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChowLinResult {
    /// GLS regression coefficients, one per indicator column.
    pub beta: Vec<f64>,
    /// Quarterly GLS residuals.
    pub u_q: Vec<f64>,
    /// Monthly estimate for every indicator row, extrapolated rows included.
    pub y_m: Vec<f64>,
    /// The AR(1) coefficient actually used.
    pub rho_used: f64,
}

/// The n×3n month-to-quarter map: flow rows hold three consecutive ones,
/// stock rows select each quarter's third month.
pub fn build_aggregation(n: usize, mode: AggregationMode) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::config("need at least one quarter"));
    }
    Ok(Matrix::from_fn(n, 3 * n, |i, j| {
        let inside = match mode {
            AggregationMode::Flow => j >= 3 * i && j < 3 * i + 3,
            AggregationMode::Stock => j == 3 * i + 2,
        };
        f64::from(inside)
    }))
}

/// Unit-variance AR(1) covariance: `V[i][j] = rho^|i-j|`. Any positive
/// scaling of V cancels throughout the GLS formulas, so the variance is
/// normalized to one.
pub fn ar1_covariance(rho: f64, size: usize) -> Result<Matrix> {
    if !(rho.is_finite() && rho.abs() < 1.0) {
        return Err(Error::config(format!(
            "AR(1) coefficient must lie strictly inside (-1, 1), got {rho}"
        )));
    }
    if size == 0 {
        return Err(Error::config("covariance size must be at least 1"));
    }
    let mut powers = vec![1.0; size];
    for k in 1..size {
        powers[k] = powers[k - 1] * rho;
    }
    Ok(Matrix::from_fn(size, size, |i, j| {
        powers[i.abs_diff(j)]
    }))
}

struct GlsSolution {
    beta: Vec<f64>,
    u_q: Vec<f64>,
    y_m: Vec<f64>,
    log_likelihood: f64,
}

/// One GLS pass at a fixed rho. Returns the full solution and the
/// log-likelihood used for rho selection.
fn solve_at_rho(
    problem: &DisaggregationProblem,
    aggregation: &Matrix,
    rho: f64,
) -> Result<GlsSolution> {
    let n = problem.y_q.len();
    let months = 3 * n;

    let v = ar1_covariance(rho, months)?;
    // Quarterly-level design and covariance.
    let x_in = submatrix_rows(&problem.x_m, 0, months);
    let x_q = aggregation.matmul(&x_in);
    let cv = aggregation.matmul(&v); // n × 3n
    let v_q = cv.matmul(&aggregation.transpose()); // n × n
    let chol_vq = Cholesky::factor(&v_q, SPD_PIVOT_TOL).map_err(|_| {
        Error::data(format!(
            "quarterly covariance is not positive definite at rho={rho:.2}"
        ))
    })?;

    // beta = (X'V⁻¹X)⁻¹ X'V⁻¹y at the quarterly level.
    let viq_x = chol_vq.solve_matrix(&x_q); // n × p
    let gram = x_q.transpose().matmul(&viq_x); // p × p
    let viq_y = chol_vq.solve(&problem.y_q);
    let rhs = x_q.tr_matvec(&viq_y); // p
    let chol_gram = Cholesky::factor(&gram, SPD_PIVOT_TOL).map_err(|_| {
        Error::data("indicator columns are collinear at the quarterly level")
    })?;
    let beta = chol_gram.solve(&rhs);

    // Quarterly residuals and their smoothed monthly distribution.
    let fitted_q = x_q.matvec(&beta);
    let u_q: Vec<f64> = problem
        .y_q
        .iter()
        .zip(&fitted_q)
        .map(|(y, f)| y - f)
        .collect();
    let w = chol_vq.solve(&u_q); // V_q⁻¹ u
    let monthly_residual = cv.tr_matvec(&w); // (CV)' w = V C' V_q⁻¹ u

    let mut y_m = Vec::with_capacity(problem.x_m.rows());
    for r in 0..months {
        let xb = dot_row(&problem.x_m, r, &beta);
        y_m.push(xb + monthly_residual[r]);
    }
    // Extrapolated months continue the AR(1) decay of the last in-sample
    // monthly residual.
    let tail = monthly_residual[months - 1];
    let mut decay = 1.0;
    for r in months..problem.x_m.rows() {
        decay *= rho;
        y_m.push(dot_row(&problem.x_m, r, &beta) + decay * tail);
    }

    if !(beta.iter().all(|b| b.is_finite()) && y_m.iter().all(|v| v.is_finite())) {
        return Err(Error::data(format!(
            "disaggregation produced non-finite values at rho={rho:.2}"
        )));
    }

    // Gaussian GLS log-likelihood up to constants, with the error variance
    // concentrated out.
    let ssr: f64 = u_q.iter().zip(&w).map(|(u, wi)| u * wi).sum();
    let log_likelihood =
        -0.5 * ((n as f64) * ssr.max(1e-300).ln() + chol_vq.log_det());

    Ok(GlsSolution {
        beta,
        u_q,
        y_m,
        log_likelihood,
    })
}

/// The rho grid searched when `rho = "estimate"`: -0.98 to 0.98 in steps
/// of 0.02.
pub fn rho_grid() -> Vec<f64> {
    (-49..=49).map(|k| f64::from(k) * 0.02).collect()
}

/// The concentrated quarterly GLS log-likelihood at a fixed rho (up to an
/// additive constant); the criterion maximized by rho estimation.
pub fn gls_log_likelihood(problem: &DisaggregationProblem, rho: f64) -> Result<f64> {
    problem.validate()?;
    let aggregation = build_aggregation(problem.y_q.len(), problem.mode)?;
    Ok(solve_at_rho(problem, &aggregation, rho)?.log_likelihood)
}

/// Distribute the quarterly target over months by GLS regression on the
/// monthly indicators with AR(1) errors. Indicator rows beyond `3n` receive
/// regression-plus-decayed-residual extrapolations.
pub fn chow_lin(problem: &DisaggregationProblem) -> Result<ChowLinResult> {
    problem.validate()?;
    let aggregation = build_aggregation(problem.y_q.len(), problem.mode)?;
    let (solution, rho_used) = match problem.rho {
        RhoSpec::Fixed(rho) => (solve_at_rho(problem, &aggregation, rho)?, rho),
        RhoSpec::Estimate => {
            let mut best: Option<(GlsSolution, f64)> = None;
            for rho in rho_grid() {
                let candidate = solve_at_rho(problem, &aggregation, rho)?;
                let replace = match &best {
                    Some((incumbent, _)) => {
                        candidate.log_likelihood > incumbent.log_likelihood
                    }
                    None => true,
                };
                if replace {
                    best = Some((candidate, rho));
                }
            }
            best.expect("grid is nonempty")
        }
    };
    Ok(ChowLinResult {
        beta: solution.beta,
        u_q: solution.u_q,
        y_m: solution.y_m,
        rho_used,
    })
}

fn submatrix_rows(m: &Matrix, start: usize, end: usize) -> Matrix {
    Matrix::from_fn(end - start, m.cols(), |i, j| m.at(start + i, j))
}

fn dot_row(m: &Matrix, r: usize, x: &[f64]) -> f64 {
    m.row(r).iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Working frequency of the neural interpolator's inputs and target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RideTransform {
    /// Use levels as given.
    #[default]
    Level,
    /// Year-over-year rates: indicators lose their first 12 months, the
    /// target its first 4 quarters.
    Yoy,
}

/// How fitted months are collapsed back to quarters for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuarterlyAggregate {
    /// Average of the three months (index-style targets).
    #[default]
    Mean,
    /// Sum of the three months (flow targets).
    Sum,
}

/// Configuration of the neural monthly interpolator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RideConfig {
    pub spec: NetworkSpec,
    pub train: TrainConfig,
    #[serde(default)]
    pub transform: RideTransform,
    #[serde(default)]
    pub quarterly_eval: QuarterlyAggregate,
    /// Trailing fraction of monthly rows held out for validation.
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
}

fn default_val_fraction() -> f64 {
    0.3
}

impl RideConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.train.validate()?;
        if self.spec.lstm.is_some() {
            return Err(Error::config(
                "the monthly interpolator is a feed-forward mapper; remove the lstm block",
            ));
        }
        if self.train.loss != crate::loss::LossKind::Mse {
            return Err(Error::config(
                "the monthly interpolator trains on squared error; set loss = mse",
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::config(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// A trained interpolator bundled with everything inference needs: the
/// feature scaler and the target moments used to undo standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RideModel {
    pub network: Network,
    pub feature_scaler: ScalerParams,
    pub target_mean: f64,
    pub target_std: f64,
    pub transform: RideTransform,
}

/// Everything a training run returns.
#[derive(Debug, Clone, PartialEq)]
pub struct RideOutcome {
    pub model: RideModel,
    /// De-standardized monthly estimate for every (transformed) indicator
    /// row, in row order.
    pub fitted: Vec<f64>,
    pub history: TrainHistory,
    /// Monthly rows dropped from the front by the transform (12 for
    /// year-over-year, 0 for levels).
    pub months_dropped: usize,
}

/// Train the interpolator: each quarter's (level or YoY) target value is
/// replicated across its three months; features and target are
/// standardized on the training rows; the trailing `val_fraction` of rows
/// validates. Returns the model, the de-standardized fit for every row,
/// and the training curves.
pub fn ride_train(
    config: &RideConfig,
    indicators: &SeriesFrame,
    y_q: &[f64],
) -> Result<RideOutcome> {
    config.validate()?;
    if indicators.start().frequency() != crate::series::Frequency::Monthly {
        return Err(Error::data("indicator frame must be monthly"));
    }

    // Apply the working transform to both sides.
    let (frame, target_q, months_dropped) = match config.transform {
        RideTransform::Level => (indicators.clone(), y_q.to_vec(), 0),
        RideTransform::Yoy => {
            let frame = indicators.yoy_change()?;
            let target = yoy_change(y_q, 4)?;
            (frame, target, 12)
        }
    };
    let n_q = target_q.len();
    let months = 3 * n_q;
    if frame.values().rows() < months {
        return Err(Error::data(format!(
            "{n_q} quarters need {months} monthly rows after the transform, got {}",
            frame.values().rows()
        )));
    }
    if config.spec.input_width != frame.values().cols() {
        return Err(Error::config(format!(
            "network takes {} inputs but the indicators have {} columns",
            config.spec.input_width,
            frame.values().cols()
        )));
    }
    if target_q.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("quarterly target contains non-finite values"));
    }

    // Each quarter's value labels all three of its months.
    let monthly_target: Vec<f64> = (0..months).map(|m| target_q[m / 3]).collect();

    // Time-ordered split: the trailing fraction validates.
    let n_val = ((months as f64) * config.val_fraction).ceil() as usize;
    let n_val = n_val.clamp(1, months - 1);
    let n_train = months - n_val;
    let train_rows: Vec<usize> = (0..n_train).collect();

    let feature_scaler = ScalerParams::fit(frame.values(), Some(&train_rows))?;
    let scaled = feature_scaler.transform(frame.values());

    let target_mean = monthly_target[..n_train].iter().sum::<f64>() / n_train as f64;
    let target_var = monthly_target[..n_train]
        .iter()
        .map(|v| (v - target_mean).powi(2))
        .sum::<f64>()
        / n_train as f64;
    let target_std = target_var.sqrt();
    if target_std == 0.0 {
        return Err(Error::data(
            "quarterly target is constant over the training months",
        ));
    }
    let scaled_target: Vec<f64> = monthly_target
        .iter()
        .map(|v| (v - target_mean) / target_std)
        .collect();

    let rows: Vec<Vec<f64>> = (0..months).map(|r| scaled.row(r).to_vec()).collect();
    let train_set = SampleSet::from_rows(&rows[..n_train], &scaled_target[..n_train])?;
    let val_set = SampleSet::from_rows(&rows[n_train..], &scaled_target[n_train..])?;

    let net = Network::init(&config.spec, config.train.seed)?;
    let mut trainer = Trainer::new(net, config.train.optimizer);
    trainer.run(
        &train_set,
        &val_set,
        &config.train,
        config.train.epochs,
        None,
    )?;

    let model = RideModel {
        network: trainer.net,
        feature_scaler,
        target_mean,
        target_std,
        transform: config.transform,
    };
    // Fit every transformed row, the held-out months included.
    let all_rows: Vec<Vec<f64>> = (0..frame.values().rows())
        .map(|r| frame.values().row(r).to_vec())
        .collect();
    let fitted = ride_extrapolate(&model, &all_rows)?;
    Ok(RideOutcome {
        model,
        fitted,
        history: trainer.history,
        months_dropped,
    })
}

/// Pure inference: scale each (already transformed) indicator row with the
/// training-time scaler, run the network, and undo the target
/// standardization. Empty input gives empty output.
pub fn ride_extrapolate(model: &RideModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let width = model.network.spec.input_width;
    let mut out = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::data(format!(
                "row {r} has {} columns but the model takes {width}",
                row.len()
            )));
        }
        let scaled = model.feature_scaler.transform_row(row);
        let pred = model.network.infer_row(&scaled)?;
        out.push(pred * model.target_std + model.target_mean);
    }
    Ok(out)
}

/// Collapse a monthly series to full quarters (trailing partial quarters
/// are dropped) by mean or sum.
pub fn quarterly_aggregate(monthly: &[f64], how: QuarterlyAggregate) -> Vec<f64> {
    monthly
        .chunks_exact(3)
        .map(|q| {
            let sum: f64 = q.iter().sum();
            match how {
                QuarterlyAggregate::Mean => sum / 3.0,
                QuarterlyAggregate::Sum => sum,
            }
        })
        .collect()
}
