//! Time-indexed data frames and the dataset operations feeding every
//! pipeline: CSV ingestion, missing-value trimming, growth transforms,
//! standardization, chronological/shuffled splits, and label statistics.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Observation frequency of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    Monthly,
    Quarterly,
}

impl Frequency {
    pub fn periods_per_year(self) -> usize {
        match self {
            Frequency::Monthly => 12,
            Frequency::Quarterly => 4,
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frequency::Monthly => write!(f, "monthly"),
            Frequency::Quarterly => write!(f, "quarterly"),
        }
    }
}

/// One month or one quarter on the calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Period {
    year: i32,
    /// 1-based month (1..=12) or quarter (1..=4).
    index: u8,
    freq: Frequency,
}

impl Period {
    pub fn new(freq: Frequency, year: i32, index: u8) -> Result<Period> {
        let max = freq.periods_per_year() as u8;
        if index == 0 || index > max {
            return Err(Error::data(format!(
                "period index {index} out of range 1..={max} for {freq} frequency"
            )));
        }
        Ok(Period { year, index, freq })
    }

    pub fn monthly(year: i32, month: u8) -> Result<Period> {
        Period::new(Frequency::Monthly, year, month)
    }

    pub fn quarterly(year: i32, quarter: u8) -> Result<Period> {
        Period::new(Frequency::Quarterly, year, quarter)
    }

    pub fn frequency(self) -> Frequency {
        self.freq
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn index(self) -> u8 {
        self.index
    }

    /// The immediately following period at the same frequency.
    pub fn next(self) -> Period {
        let max = self.freq.periods_per_year() as u8;
        if self.index == max {
            Period {
                year: self.year + 1,
                index: 1,
                freq: self.freq,
            }
        } else {
            Period {
                year: self.year,
                index: self.index + 1,
                freq: self.freq,
            }
        }
    }

    /// The period `n` steps later.
    pub fn plus(self, n: usize) -> Period {
        let mut p = self;
        for _ in 0..n {
            p = p.next();
        }
        p
    }

    /// First month of a quarter; identity for monthly periods.
    pub fn first_month(self) -> Period {
        match self.freq {
            Frequency::Monthly => self,
            Frequency::Quarterly => Period {
                year: self.year,
                index: (self.index - 1) * 3 + 1,
                freq: Frequency::Monthly,
            },
        }
    }

    /// Parse a date string at a declared frequency. Accepts `YYYY-Qn`,
    /// `YYYY-MM`, and `YYYY-MM-DD`; month forms are folded onto the
    /// containing quarter when the frequency is quarterly.
    pub fn parse(s: &str, freq: Frequency) -> Result<Period> {
        let s = s.trim();
        let bad = || Error::data(format!("unparseable date `{s}` for {freq} frequency"));
        let mut parts = s.splitn(2, '-');
        let year: i32 = parts
            .next()
            .and_then(|y| y.parse().ok())
            .ok_or_else(bad)?;
        let rest = parts.next().ok_or_else(bad)?;
        if let Some(q) = rest.strip_prefix('Q').or_else(|| rest.strip_prefix('q')) {
            if freq != Frequency::Quarterly {
                return Err(bad());
            }
            let quarter: u8 = q.parse().map_err(|_| bad())?;
            return Period::quarterly(year, quarter);
        }
        let month_part = rest.split('-').next().ok_or_else(bad)?;
        let month: u8 = month_part.parse().map_err(|_| bad())?;
        if month == 0 || month > 12 {
            return Err(bad());
        }
        match freq {
            Frequency::Monthly => Period::monthly(year, month),
            Frequency::Quarterly => Period::quarterly(year, (month - 1) / 3 + 1),
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.freq {
            Frequency::Monthly => write!(f, "{:04}-{:02}", self.year, self.index),
            Frequency::Quarterly => write!(f, "{:04}-Q{}", self.year, self.index),
        }
    }
}

/// Values treated as missing when reading CSV cells.
fn is_missing_token(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t == "." || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// A contiguous block of equally spaced observations for one or more series.
/// Missing values are stored as NaN until [`SeriesFrame::trim_missing`]
/// removes them.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    start: Period,
    columns: Vec<String>,
    values: Matrix,
}

impl SeriesFrame {
    /// Assemble a frame from parts. The matrix row count is the number of
    /// periods starting at `start`.
    pub fn from_parts(start: Period, columns: Vec<String>, values: Matrix) -> Result<SeriesFrame> {
        if columns.is_empty() {
            return Err(Error::data("frame must have at least one value column"));
        }
        if values.cols() != columns.len() {
            return Err(Error::data(format!(
                "frame has {} column names but {} value columns",
                columns.len(),
                values.cols()
            )));
        }
        if values.rows() == 0 {
            return Err(Error::data("frame must have at least one row"));
        }
        Ok(SeriesFrame {
            start,
            columns,
            values,
        })
    }

    /// Read a frame from CSV. The first column holds dates, every other
    /// column one series. Validates parseable dates, uniform frequency with
    /// no gaps or duplicates, and rectangular numeric rows; empty cells and
    /// the tokens `.`/`NA`/`NaN` become missing markers.
    pub fn load_csv(path: &Path, freq: Frequency) -> Result<SeriesFrame> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;

        let headers = reader
            .headers()
            .map_err(|e| Error::data(format!("{}: bad header: {e}", path.display())))?
            .clone();
        if headers.len() < 2 {
            return Err(Error::data(format!(
                "{}: need a date column plus at least one value column",
                path.display()
            )));
        }
        let columns: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut expected: Option<Period> = None;
        let mut start: Option<Period> = None;
        for (line, record) in reader.records().enumerate() {
            let record =
                record.map_err(|e| Error::data(format!("{}: row {}: {e}", path.display(), line + 2)))?;
            let date = Period::parse(&record[0], freq)
                .map_err(|e| Error::data(format!("{}: row {}: {e}", path.display(), line + 2)))?;
            match expected {
                None => start = Some(date),
                Some(want) => {
                    if date != want {
                        return Err(Error::data(format!(
                            "{}: row {}: expected period {want}, found {date} \
                             (dates must be unique, sorted, and gap-free)",
                            path.display(),
                            line + 2
                        )));
                    }
                }
            }
            expected = Some(date.next());
            let mut row = Vec::with_capacity(columns.len());
            for cell in record.iter().skip(1) {
                if is_missing_token(cell) {
                    row.push(f64::NAN);
                } else {
                    let v: f64 = cell.parse().map_err(|_| {
                        Error::data(format!(
                            "{}: row {}: non-numeric cell `{cell}`",
                            path.display(),
                            line + 2
                        ))
                    })?;
                    row.push(v);
                }
            }
            rows.push(row);
        }
        let start = start
            .ok_or_else(|| Error::data(format!("{}: no data rows", path.display())))?;
        SeriesFrame::from_parts(start, columns, Matrix::from_rows(&rows)?)
    }

    /// Serialize the frame as CSV with values printed at 6 decimals and
    /// missing markers as empty cells.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        let mut period = self.start;
        for i in 0..self.n_rows() {
            out.push_str(&period.to_string());
            for v in self.values.row(i) {
                out.push(',');
                if v.is_nan() {
                    // empty cell marks a missing value
                } else {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
            period = period.next();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))
    }

    pub fn start(&self) -> Period {
        self.start
    }

    pub fn frequency(&self) -> Frequency {
        self.start.freq
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.cols()
    }

    pub fn period_at(&self, row: usize) -> Period {
        self.start.plus(row)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// New frame containing a subset of columns, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<SeriesFrame> {
        let mut idx = Vec::with_capacity(names.len());
        for n in names {
            idx.push(
                self.column_index(n)
                    .ok_or_else(|| Error::data(format!("unknown column `{n}`")))?,
            );
        }
        let values = Matrix::from_fn(self.n_rows(), idx.len(), |i, j| self.values.at(i, idx[j]));
        SeriesFrame::from_parts(self.start, names.to_vec(), values)
    }

    /// New frame without the named column.
    pub fn drop_column(&self, name: &str) -> Result<SeriesFrame> {
        let keep: Vec<String> = self
            .columns
            .iter()
            .filter(|c| c.as_str() != name)
            .cloned()
            .collect();
        if keep.len() == self.columns.len() {
            return Err(Error::data(format!("unknown column `{name}`")));
        }
        self.select_columns(&keep)
    }

    /// Extract one column as a plain vector.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .column_index(name)
            .ok_or_else(|| Error::data(format!("unknown column `{name}`")))?;
        Ok((0..self.n_rows()).map(|i| self.values.at(i, j)).collect())
    }

    /// Keep the longest suffix of rows in which no column has a missing
    /// value. Errors when the final row itself has a missing value (no
    /// usable suffix exists).
    pub fn trim_missing(&self) -> Result<SeriesFrame> {
        let n = self.n_rows();
        let mut first_ok = n;
        for i in (0..n).rev() {
            if self.values.row(i).iter().any(|v| v.is_nan()) {
                break;
            }
            first_ok = i;
        }
        if first_ok == n {
            return Err(Error::data(
                "missing value in the final row: no complete suffix to keep",
            ));
        }
        let values = Matrix::from_fn(n - first_ok, self.n_cols(), |i, j| {
            self.values.at(first_ok + i, j)
        });
        SeriesFrame::from_parts(self.start.plus(first_ok), self.columns.clone(), values)
    }

    /// Log first difference of every column: output row t holds
    /// `ln(x[t+1]) - ln(x[t])`, stamped with the later period. One fewer row.
    pub fn log_first_difference(&self) -> Result<SeriesFrame> {
        let n = self.n_rows();
        if n < 2 {
            return Err(Error::data(
                "log first difference needs at least two rows",
            ));
        }
        for j in 0..self.n_cols() {
            for i in 0..n {
                let v = self.values.at(i, j);
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::data(format!(
                        "log first difference requires positive values; column `{}` row {} is {v}",
                        self.columns[j], i
                    )));
                }
            }
        }
        let values = Matrix::from_fn(n - 1, self.n_cols(), |i, j| {
            self.values.at(i + 1, j).ln() - self.values.at(i, j).ln()
        });
        SeriesFrame::from_parts(self.start.next(), self.columns.clone(), values)
    }

    /// Year-over-year change of every column: output row t holds
    /// `x[t+p]/x[t] - 1` where p is one year of periods, stamped with the
    /// later period. `p` fewer rows.
    pub fn yoy_change(&self) -> Result<SeriesFrame> {
        let p = self.frequency().periods_per_year();
        let n = self.n_rows();
        if n <= p {
            return Err(Error::data(format!(
                "year-over-year change needs more than {p} rows, got {n}"
            )));
        }
        for j in 0..self.n_cols() {
            for i in 0..n - p {
                let base = self.values.at(i, j);
                if !base.is_finite() || base == 0.0 {
                    return Err(Error::data(format!(
                        "year-over-year change has a zero or missing base value \
                         in column `{}` row {i}",
                        self.columns[j]
                    )));
                }
                if !self.values.at(i + p, j).is_finite() {
                    return Err(Error::data(format!(
                        "year-over-year change has a missing value in column `{}` row {}",
                        self.columns[j],
                        i + p
                    )));
                }
            }
        }
        let values = Matrix::from_fn(n - p, self.n_cols(), |i, j| {
            self.values.at(i + p, j) / self.values.at(i, j) - 1.0
        });
        SeriesFrame::from_parts(self.start.plus(p), self.columns.clone(), values)
    }
}

/// Log first difference of a single series (see
/// [`SeriesFrame::log_first_difference`] for the frame-wide version).
pub fn log_first_difference(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::data(
            "log first difference needs at least two values",
        ));
    }
    for (i, v) in series.iter().enumerate() {
        if !v.is_finite() || *v <= 0.0 {
            return Err(Error::data(format!(
                "log first difference requires positive values; index {i} is {v}"
            )));
        }
    }
    Ok(series.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
}

/// Year-over-year change of a single series with an explicit lag.
pub fn yoy_change(series: &[f64], period: usize) -> Result<Vec<f64>> {
    if period == 0 {
        return Err(Error::config("year-over-year period must be positive"));
    }
    if series.len() <= period {
        return Err(Error::data(format!(
            "year-over-year change needs more than {period} values, got {}",
            series.len()
        )));
    }
    let mut out = Vec::with_capacity(series.len() - period);
    for i in 0..series.len() - period {
        let base = series[i];
        if !base.is_finite() || base == 0.0 {
            return Err(Error::data(format!(
                "year-over-year change has a zero or missing base value at index {i}"
            )));
        }
        out.push(series[i + period] / base - 1.0);
    }
    Ok(out)
}

/// Column means and population standard deviations fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerParams {
    /// Fit on the given rows of a matrix (all rows when `rows` is None).
    /// Errors on a constant column: standardizing it would divide by zero.
    pub fn fit(data: &Matrix, rows: Option<&[usize]>) -> Result<ScalerParams> {
        let idx: Vec<usize> = match rows {
            Some(r) => r.to_vec(),
            None => (0..data.rows()).collect(),
        };
        if idx.is_empty() {
            return Err(Error::data("cannot fit a scaler on zero rows"));
        }
        let n = idx.len() as f64;
        let mut mean = vec![0.0; data.cols()];
        for &i in &idx {
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; data.cols()];
        for &i in &idx {
            for (j, v) in data.row(i).iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d;
            }
        }
        let mut std = Vec::with_capacity(var.len());
        for (j, v) in var.iter().enumerate() {
            let s = (v / n).sqrt();
            if s == 0.0 || !s.is_finite() {
                return Err(Error::data(format!(
                    "column {j} is constant on the fitted rows; cannot standardize"
                )));
            }
            std.push(s);
        }
        Ok(ScalerParams { mean, std })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, data: &Matrix) -> Matrix {
        Matrix::from_fn(data.rows(), data.cols(), |i, j| {
            (data.at(i, j) - self.mean[j]) / self.std[j]
        })
    }
}

/// Standardize a matrix with parameters fitted on (optionally a subset of)
/// its rows; returns the transformed matrix and the fitted parameters.
pub fn standardize(data: &Matrix, fit_rows: Option<&[usize]>) -> Result<(Matrix, ScalerParams)> {
    let params = ScalerParams::fit(data, fit_rows)?;
    Ok((params.transform(data), params))
}

/// Fractions and ordering for a train/validation/test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of all rows held out as the test set.
    pub test_fraction: f64,
    /// Fraction of the remaining rows held out as the validation set.
    pub val_fraction: f64,
    /// Shuffle rows before partitioning; otherwise the parts are contiguous
    /// time blocks ordered train -> validation -> test.
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.4,
            val_fraction: 0.3,
            shuffle: false,
            seed: 0,
        }
    }
}

/// Row indices of the three split parts. Indices refer to rows of the frame
/// the split was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitBundle {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partition `n_rows` rows into train/validation/test. Sizes: the test part
/// takes `ceil(n * test_fraction)` rows, the validation part
/// `ceil(remainder * val_fraction)`, the training part the rest. Errors when
/// any part would be empty.
pub fn split(n_rows: usize, spec: &SplitSpec) -> Result<SplitBundle> {
    if !(0.0..1.0).contains(&spec.test_fraction) || !(0.0..1.0).contains(&spec.val_fraction) {
        return Err(Error::config(format!(
            "split fractions must lie in [0, 1), got test={} val={}",
            spec.test_fraction, spec.val_fraction
        )));
    }
    let n_test = (n_rows as f64 * spec.test_fraction).ceil() as usize;
    let rest = n_rows.saturating_sub(n_test);
    let n_val = (rest as f64 * spec.val_fraction).ceil() as usize;
    let n_train = rest.saturating_sub(n_val);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::data(format!(
            "split of {n_rows} rows leaves an empty part (train={n_train}, val={n_val}, test={n_test})"
        )));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    if spec.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        order.shuffle(&mut rng);
    }
    Ok(SplitBundle {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    })
}

/// Class balance summary for binary labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelStats {
    pub count: usize,
    pub positives: usize,
    pub negatives: usize,
    pub positive_share: f64,
    /// ln(positives/negatives): used to seed the output bias of a sigmoid
    /// classifier so its initial mean prediction matches the class balance.
    pub initial_bias: f64,
}

/// Compute label statistics. Labels must be exactly 0 or 1 and both classes
/// must be present (the bias term is infinite otherwise).
pub fn label_stats(labels: &[f64]) -> Result<LabelStats> {
    if labels.is_empty() {
        return Err(Error::data("label statistics need at least one label"));
    }
    let mut positives = 0usize;
    for (i, l) in labels.iter().enumerate() {
        if *l == 1.0 {
            positives += 1;
        } else if *l != 0.0 {
            return Err(Error::data(format!(
                "labels must be 0 or 1, found {l} at index {i}"
            )));
        }
    }
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::data(
            "labels contain a single class; class balance is undefined",
        ));
    }
    Ok(LabelStats {
        count: labels.len(),
        positives,
        negatives,
        positive_share: positives as f64 / labels.len() as f64,
        initial_bias: (positives as f64 / negatives as f64).ln(),
    })
}
