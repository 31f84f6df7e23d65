//! C ABI surface for the macroxfer library.
//!
//! Conventions:
//! * Every fallible call returns a [`MacroxferStatus`]; `MACROXFER_STATUS_OK`
//!   (zero) means success.
//! * On failure the call stores a human-readable message retrievable with
//!   [`macroxfer_last_error`]. The message is thread-local and stays valid
//!   until the next failing call on the same thread.
//! * Models are opaque handles created by `macroxfer_model_load` /
//!   `macroxfer_model_from_json` and released with `macroxfer_model_free`.
//! * Array arguments are pointer + length; matrices are row-major.
//! * Panics never cross the boundary: they are caught and reported as
//!   `MACROXFER_STATUS_INTERNAL_PANIC`.
//!
//! The generated header lives at `include/macroxfer.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use macroxfer::disagg::{chow_lin, AggregationMode, DisaggregationProblem, RhoSpec};
use macroxfer::experiment::{run_experiment, ExperimentConfig};
use macroxfer::linalg::Matrix;
use macroxfer::metrics::{auc, confusion, mae, pearson};
use macroxfer::network::Network;
use macroxfer::synth::{generate_regime_series, RegimeGenParams};
use macroxfer::Error;

/// Result of every fallible ABI call. Values 1-3 mirror the library's
/// process exit codes; 4 and 5 are boundary-specific.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MacroxferStatus {
    /// The call succeeded.
    Ok = 0,
    /// Invalid configuration or parameters.
    ConfigError = 1,
    /// Invalid or inconsistent data.
    DataError = 2,
    /// Training failed (for example the loss became non-finite).
    TrainingError = 3,
    /// A pointer argument was null or text was not valid UTF-8.
    InvalidArgument = 4,
    /// An internal invariant failed; the library caught a panic.
    InternalPanic = 5,
}

/// Binary classification counts at a fixed threshold.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct MacroxferConfusion {
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_positives: u64,
}

/// How monthly values relate to the quarterly total they must respect.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MacroxferAggregation {
    /// Each quarter is the sum of its three months.
    Flow = 0,
    /// Each quarter is its third month's value.
    Stock = 1,
}

/// Opaque trained-model handle.
pub struct MacroxferModel {
    net: Network,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let owned = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn status_of(error: &Error) -> MacroxferStatus {
    match error.exit_code() {
        1 => MacroxferStatus::ConfigError,
        2 => MacroxferStatus::DataError,
        _ => MacroxferStatus::TrainingError,
    }
}

fn fail(error: &Error) -> MacroxferStatus {
    set_error(&error.to_string());
    status_of(error)
}

fn invalid(message: &str) -> MacroxferStatus {
    set_error(message);
    MacroxferStatus::InvalidArgument
}

/// Run `f`, converting a panic into `InternalPanic` instead of unwinding
/// across the ABI.
fn guarded(f: impl FnOnce() -> MacroxferStatus) -> MacroxferStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {message}"));
            MacroxferStatus::InternalPanic
        }
    }
}

/// View a pointer + length as a slice. Null is accepted only for zero
/// length.
unsafe fn slice_arg<'a>(
    ptr: *const f64,
    len: usize,
    name: &str,
) -> Result<&'a [f64], MacroxferStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(invalid(&format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, MacroxferStatus> {
    if ptr.is_null() {
        return Err(invalid(&format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| invalid(&format!("{name} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, MacroxferStatus> {
    if ptr.is_null() {
        return Err(invalid(&format!("{name} is null")));
    }
    Ok(&mut *ptr)
}

unsafe fn model_arg<'a>(
    ptr: *const MacroxferModel,
) -> Result<&'a MacroxferModel, MacroxferStatus> {
    if ptr.is_null() {
        return Err(invalid("model is null"));
    }
    Ok(&*ptr)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn macroxfer_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing this thread's most recent failure. Empty until a call
/// fails; overwritten by the next failure on the same thread.
#[no_mangle]
pub extern "C" fn macroxfer_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Area under the ROC curve of `scores` against binary `labels` (0.0 or
/// 1.0). Both arrays hold `len` values; the result lands in `*out`.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_auc(
    scores: *const f64,
    labels: *const f64,
    len: usize,
    out: *mut f64,
) -> MacroxferStatus {
    guarded(|| {
        let (scores, labels, out) = match (
            slice_arg(scores, len, "scores"),
            slice_arg(labels, len, "labels"),
            out_arg(out, "out"),
        ) {
            (Ok(s), Ok(l), Ok(o)) => (s, l, o),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return e,
        };
        match auc(scores, labels) {
            Ok(value) => {
                *out = value;
                MacroxferStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Mean absolute error of `predictions` against `targets`.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_mae(
    predictions: *const f64,
    targets: *const f64,
    len: usize,
    out: *mut f64,
) -> MacroxferStatus {
    guarded(|| {
        let (predictions, targets, out) = match (
            slice_arg(predictions, len, "predictions"),
            slice_arg(targets, len, "targets"),
            out_arg(out, "out"),
        ) {
            (Ok(p), Ok(t), Ok(o)) => (p, t, o),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return e,
        };
        match mae(predictions, targets) {
            Ok(value) => {
                *out = value;
                MacroxferStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Pearson correlation between two equal-length series.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_pearson(
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> MacroxferStatus {
    guarded(|| {
        let (a, b, out) = match (
            slice_arg(a, len, "a"),
            slice_arg(b, len, "b"),
            out_arg(out, "out"),
        ) {
            (Ok(a), Ok(b), Ok(o)) => (a, b, o),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return e,
        };
        match pearson(a, b) {
            Ok(value) => {
                *out = value;
                MacroxferStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Confusion-matrix counts of `scores` against binary `labels` at
/// `threshold` (a score >= threshold predicts the positive class).
#[no_mangle]
pub unsafe extern "C" fn macroxfer_confusion(
    scores: *const f64,
    labels: *const f64,
    len: usize,
    threshold: f64,
    out: *mut MacroxferConfusion,
) -> MacroxferStatus {
    guarded(|| {
        let (scores, labels, out) = match (
            slice_arg(scores, len, "scores"),
            slice_arg(labels, len, "labels"),
            out_arg(out, "out"),
        ) {
            (Ok(s), Ok(l), Ok(o)) => (s, l, o),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return e,
        };
        match confusion(scores, labels, threshold) {
            Ok(m) => {
                *out = MacroxferConfusion {
                    true_negatives: m.tn as u64,
                    false_positives: m.fp as u64,
                    false_negatives: m.fn_ as u64,
                    true_positives: m.tp as u64,
                };
                MacroxferStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Distribute `n_quarters` quarterly values over months using a GLS
/// regression on monthly indicators with AR(1) residuals.
///
/// `indicators` is row-major with `n_months` rows and `n_indicators`
/// columns; the regression uses the columns exactly as given (no implicit
/// intercept) and rejects columns that are constant in-sample. `n_months`
/// must be at least `3 * n_quarters`; extra trailing rows are
/// extrapolated. Pass NaN as `rho` to pick the residual autocorrelation by
/// maximum likelihood, or a fixed value in (-1, 1).
/// `out_monthly` receives `n_months` values; `out_rho` (optional, may be
/// null) receives the autocorrelation actually used.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_chow_lin(
    quarterly: *const f64,
    n_quarters: usize,
    indicators: *const f64,
    n_months: usize,
    n_indicators: usize,
    aggregation: MacroxferAggregation,
    rho: f64,
    out_monthly: *mut f64,
    out_rho: *mut f64,
) -> MacroxferStatus {
    guarded(|| {
        let (y_q, x_flat) = match (
            slice_arg(quarterly, n_quarters, "quarterly"),
            slice_arg(
                indicators,
                n_months.saturating_mul(n_indicators),
                "indicators",
            ),
        ) {
            (Ok(y), Ok(x)) => (y, x),
            (Err(e), _) | (_, Err(e)) => return e,
        };
        if out_monthly.is_null() {
            return invalid("out_monthly is null");
        }
        let x_m = match Matrix::from_vec(n_months, n_indicators, x_flat.to_vec()) {
            Ok(m) => m,
            Err(e) => return fail(&e),
        };
        let problem = DisaggregationProblem {
            y_q: y_q.to_vec(),
            x_m,
            mode: match aggregation {
                MacroxferAggregation::Flow => AggregationMode::Flow,
                MacroxferAggregation::Stock => AggregationMode::Stock,
            },
            rho: if rho.is_nan() {
                RhoSpec::Estimate
            } else {
                RhoSpec::Fixed(rho)
            },
        };
        match chow_lin(&problem) {
            Ok(result) => {
                std::ptr::copy_nonoverlapping(result.y_m.as_ptr(), out_monthly, n_months);
                if !out_rho.is_null() {
                    *out_rho = result.rho_used;
                }
                MacroxferStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Load a model saved as JSON by the training pipeline. On success `*out`
/// owns the handle; release it with `macroxfer_model_free`.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_model_load(
    path: *const c_char,
    out: *mut *mut MacroxferModel,
) -> MacroxferStatus {
    guarded(|| {
        let (path, out) = match (str_arg(path, "path"), out_arg(out, "out")) {
            (Ok(p), Ok(o)) => (p, o),
            (Err(e), _) | (_, Err(e)) => return e,
        };
        match Network::load(Path::new(path)) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(MacroxferModel { net }));
                MacroxferStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Parse a model from its JSON text instead of a file.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_model_from_json(
    json: *const c_char,
    out: *mut *mut MacroxferModel,
) -> MacroxferStatus {
    guarded(|| {
        let (json, out) = match (str_arg(json, "json"), out_arg(out, "out")) {
            (Ok(j), Ok(o)) => (j, o),
            (Err(e), _) | (_, Err(e)) => return e,
        };
        match Network::from_json_str(json) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(MacroxferModel { net }));
                MacroxferStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of features the model consumes per time step. Returns 0 for a
/// null handle.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_model_input_width(model: *const MacroxferModel) -> usize {
    if model.is_null() {
        0
    } else {
        (*model).net.spec.input_width
    }
}

/// 1 when the model starts with a recurrent layer and therefore accepts
/// multi-step input sequences, 0 otherwise (or for a null handle).
#[no_mangle]
pub unsafe extern "C" fn macroxfer_model_is_recurrent(model: *const MacroxferModel) -> i32 {
    if model.is_null() {
        0
    } else {
        i32::from((*model).net.spec.lstm.is_some())
    }
}

/// Score a single feature row of `len` values (`len` must equal the
/// model's input width). A recurrent model treats the row as a one-step
/// sequence.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_model_predict(
    model: *const MacroxferModel,
    features: *const f64,
    len: usize,
    out: *mut f64,
) -> MacroxferStatus {
    guarded(|| {
        let (model, features, out) = match (
            model_arg(model),
            slice_arg(features, len, "features"),
            out_arg(out, "out"),
        ) {
            (Ok(m), Ok(f), Ok(o)) => (m, f, o),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return e,
        };
        match model.net.infer_row(features) {
            Ok(value) => {
                *out = value;
                MacroxferStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Score a sequence of `n_steps` feature rows, row-major with `width`
/// columns. Dense models require `n_steps == 1`; recurrent models consume
/// the whole sequence and score its final step.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_model_predict_sequence(
    model: *const MacroxferModel,
    values: *const f64,
    n_steps: usize,
    width: usize,
    out: *mut f64,
) -> MacroxferStatus {
    guarded(|| {
        let (model, flat, out) = match (
            model_arg(model),
            slice_arg(values, n_steps.saturating_mul(width), "values"),
            out_arg(out, "out"),
        ) {
            (Ok(m), Ok(f), Ok(o)) => (m, f, o),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return e,
        };
        let sample: Vec<Vec<f64>> = flat.chunks(width.max(1)).map(|c| c.to_vec()).collect();
        match model.net.infer(&sample) {
            Ok(value) => {
                *out = value;
                MacroxferStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a model handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_model_free(model: *mut MacroxferModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Write a deterministic synthetic business-cycle dataset (`n` periods,
/// five indicator columns plus a recession label) as CSV to `path`. The
/// same seed always produces the same bytes.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_generate_regime_csv(
    seed: u64,
    n: usize,
    path: *const c_char,
) -> MacroxferStatus {
    guarded(|| {
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(e) => return e,
        };
        let (frame, labels) = match generate_regime_series(seed, n, &RegimeGenParams::default()) {
            Ok(pair) => pair,
            Err(e) => return fail(&e),
        };
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
        let with_labels = match macroxfer::series::SeriesFrame::from_parts(
            frame.start(),
            columns,
            combined,
        ) {
            Ok(f) => f,
            Err(e) => return fail(&e),
        };
        match with_labels.write_csv(Path::new(path)) {
            Ok(()) => MacroxferStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Run a full experiment described by a JSON config file: train, evaluate,
/// and write the artifact files next to the config's `output_dir`. This is
/// the same entry point the `macroxfer run` command uses.
#[no_mangle]
pub unsafe extern "C" fn macroxfer_run_experiment(config_path: *const c_char) -> MacroxferStatus {
    guarded(|| {
        let path = match str_arg(config_path, "config_path") {
            Ok(p) => p,
            Err(e) => return e,
        };
        let config = match ExperimentConfig::load(Path::new(path)) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        match run_experiment(&config) {
            Ok(_) => MacroxferStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use macroxfer::network::{
        Activation, LstmSpec, NetworkSpec, RegKind, Regularization,
    };

    fn ok(status: MacroxferStatus) {
        assert_eq!(status, MacroxferStatus::Ok, "error: {}", last_error());
    }

    fn last_error() -> String {
        unsafe {
            CStr::from_ptr(macroxfer_last_error())
                .to_string_lossy()
                .into_owned()
        }
    }

    fn dense_spec(input_width: usize) -> NetworkSpec {
        NetworkSpec {
            input_width,
            lstm: None,
            lstm_candidate: Default::default(),
            dense_depth: 2,
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

    #[test]
    fn version_is_a_static_string() {
        let version = unsafe { CStr::from_ptr(macroxfer_version()) };
        assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn auc_matches_the_library_and_reports_bad_input() {
        let scores = [0.1, 0.9, 0.4, 0.8, 0.35];
        let labels = [0.0, 1.0, 0.0, 1.0, 1.0];
        let mut out = f64::NAN;
        ok(unsafe { macroxfer_auc(scores.as_ptr(), labels.as_ptr(), 5, &mut out) });
        assert_eq!(out, auc(&scores, &labels).unwrap());

        let status = unsafe { macroxfer_auc(std::ptr::null(), labels.as_ptr(), 5, &mut out) };
        assert_eq!(status, MacroxferStatus::InvalidArgument);
        assert!(last_error().contains("scores"));

        // One-class labels are a data error, not a crash.
        let ones = [1.0; 5];
        let status = unsafe { macroxfer_auc(scores.as_ptr(), ones.as_ptr(), 5, &mut out) };
        assert_eq!(status, MacroxferStatus::DataError);
        assert!(!last_error().is_empty());
    }

    #[test]
    fn mae_and_pearson_round_trip() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.5, 1.5, 3.5, 4.5];
        let mut out = f64::NAN;
        ok(unsafe { macroxfer_mae(a.as_ptr(), b.as_ptr(), 4, &mut out) });
        assert_eq!(out, mae(&a, &b).unwrap());
        ok(unsafe { macroxfer_pearson(a.as_ptr(), b.as_ptr(), 4, &mut out) });
        assert_eq!(out, pearson(&a, &b).unwrap());

        let status = unsafe { macroxfer_mae(a.as_ptr(), b.as_ptr(), 4, std::ptr::null_mut()) };
        assert_eq!(status, MacroxferStatus::InvalidArgument);
    }

    #[test]
    fn confusion_counts_match_a_hand_example() {
        let scores = [0.2, 0.8, 0.6, 0.4];
        let labels = [0.0, 1.0, 0.0, 1.0];
        let mut out = MacroxferConfusion {
            true_negatives: 99,
            false_positives: 99,
            false_negatives: 99,
            true_positives: 99,
        };
        ok(unsafe { macroxfer_confusion(scores.as_ptr(), labels.as_ptr(), 4, 0.5, &mut out) });
        assert_eq!(out.true_negatives, 1);
        assert_eq!(out.false_positives, 1);
        assert_eq!(out.false_negatives, 1);
        assert_eq!(out.true_positives, 1);
    }

    #[test]
    fn chow_lin_reproduces_an_exact_flow_relation() {
        // Monthly truth 1..=24, quarterly totals, indicator = truth, so the
        // regression recovers the months exactly.
        let monthly: Vec<f64> = (1..=24).map(f64::from).collect();
        let quarterly: Vec<f64> = monthly.chunks(3).map(|c| c.iter().sum()).collect();
        let mut out = vec![0.0; 24];
        let mut rho_used = f64::NAN;
        ok(unsafe {
            macroxfer_chow_lin(
                quarterly.as_ptr(),
                8,
                monthly.as_ptr(),
                24,
                1,
                MacroxferAggregation::Flow,
                0.5,
                out.as_mut_ptr(),
                &mut rho_used,
            )
        });
        assert_eq!(rho_used, 0.5);
        for (got, want) in out.iter().zip(&monthly) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }

        // NaN asks for a maximum-likelihood autocorrelation in (-1, 1).
        ok(unsafe {
            macroxfer_chow_lin(
                quarterly.as_ptr(),
                8,
                monthly.as_ptr(),
                24,
                1,
                MacroxferAggregation::Flow,
                f64::NAN,
                out.as_mut_ptr(),
                &mut rho_used,
            )
        });
        assert!(rho_used.abs() < 1.0);

        // Too few monthly rows is a data error.
        let status = unsafe {
            macroxfer_chow_lin(
                quarterly.as_ptr(),
                8,
                monthly.as_ptr(),
                20,
                1,
                MacroxferAggregation::Flow,
                0.5,
                out.as_mut_ptr(),
                std::ptr::null_mut(),
            )
        };
        assert_eq!(status, MacroxferStatus::DataError);
    }

    #[test]
    fn chow_lin_stock_mode_pins_third_months() {
        let monthly: Vec<f64> = (0..12).map(|m| 10.0 + m as f64).collect();
        let quarterly: Vec<f64> = vec![monthly[2], monthly[5], monthly[8], monthly[11]];
        let mut out = vec![0.0; 12];
        ok(unsafe {
            macroxfer_chow_lin(
                quarterly.as_ptr(),
                4,
                monthly.as_ptr(),
                12,
                1,
                MacroxferAggregation::Stock,
                0.0,
                out.as_mut_ptr(),
                std::ptr::null_mut(),
            )
        });
        for (q, &want) in quarterly.iter().enumerate() {
            let got = out[3 * q + 2];
            assert!((got - want).abs() < 1e-8, "quarter {q}: {got} vs {want}");
        }
    }

    #[test]
    fn model_handles_round_trip_through_json_and_files() {
        let net = Network::init(&dense_spec(3), 7).unwrap();
        let json = CString::new(net.to_json_string().unwrap()).unwrap();

        let mut handle: *mut MacroxferModel = std::ptr::null_mut();
        ok(unsafe { macroxfer_model_from_json(json.as_ptr(), &mut handle) });
        assert_eq!(unsafe { macroxfer_model_input_width(handle) }, 3);
        assert_eq!(unsafe { macroxfer_model_is_recurrent(handle) }, 0);

        let row = [0.3, -0.4, 1.1];
        let mut got = f64::NAN;
        ok(unsafe { macroxfer_model_predict(handle, row.as_ptr(), 3, &mut got) });
        assert_eq!(got, net.infer_row(&row).unwrap());

        // Dense models reject multi-step sequences.
        let two_steps = [0.3, -0.4, 1.1, 0.0, 0.2, -0.5];
        let status = unsafe {
            macroxfer_model_predict_sequence(handle, two_steps.as_ptr(), 2, 3, &mut got)
        };
        assert_ne!(status, MacroxferStatus::Ok);
        unsafe { macroxfer_model_free(handle) };

        // File round trip.
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("model.json");
        net.save(&path).unwrap();
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        let mut loaded: *mut MacroxferModel = std::ptr::null_mut();
        ok(unsafe { macroxfer_model_load(c_path.as_ptr(), &mut loaded) });
        ok(unsafe { macroxfer_model_predict(loaded, row.as_ptr(), 3, &mut got) });
        assert_eq!(got, net.infer_row(&row).unwrap());
        unsafe { macroxfer_model_free(loaded) };

        // Missing file is a data error with a message.
        let bad = CString::new(dir.path().join("absent.json").to_str().unwrap()).unwrap();
        let status = unsafe { macroxfer_model_load(bad.as_ptr(), &mut loaded) };
        assert_eq!(status, MacroxferStatus::DataError);
        assert!(last_error().contains("absent.json"));
    }

    #[test]
    fn recurrent_models_consume_whole_sequences() {
        let mut spec = dense_spec(2);
        spec.lstm = Some(LstmSpec { units: 4 });
        let net = Network::init(&spec, 11).unwrap();
        let json = CString::new(net.to_json_string().unwrap()).unwrap();
        let mut handle: *mut MacroxferModel = std::ptr::null_mut();
        ok(unsafe { macroxfer_model_from_json(json.as_ptr(), &mut handle) });
        assert_eq!(unsafe { macroxfer_model_is_recurrent(handle) }, 1);

        let sequence = vec![
            vec![0.1, -0.2],
            vec![0.4, 0.0],
            vec![-0.3, 0.5],
            vec![0.2, 0.2],
        ];
        let flat: Vec<f64> = sequence.iter().flatten().copied().collect();
        let mut got = f64::NAN;
        ok(unsafe {
            macroxfer_model_predict_sequence(handle, flat.as_ptr(), 4, 2, &mut got)
        });
        assert_eq!(got, net.infer(&sequence).unwrap());
        unsafe { macroxfer_model_free(handle) };
    }

    #[test]
    fn dataset_generation_and_experiments_run_end_to_end() {
        let dir = tempfile::TempDir::new().unwrap();
        let data = dir.path().join("data.csv");
        let c_data = CString::new(data.to_str().unwrap()).unwrap();
        ok(unsafe { macroxfer_generate_regime_csv(1, 200, c_data.as_ptr()) });
        let first = std::fs::read(&data).unwrap();
        ok(unsafe { macroxfer_generate_regime_csv(1, 200, c_data.as_ptr()) });
        assert_eq!(first, std::fs::read(&data).unwrap(), "generation is deterministic");
        assert_eq!(
            String::from_utf8(first).unwrap().lines().count(),
            201,
            "header plus one row per period"
        );

        let config = dir.path().join("config.json");
        std::fs::write(
            &config,
            format!(
                r#"{{
                    "task": "cycle_classification",
                    "data": {:?},
                    "model": "logit_baseline",
                    "train": {{ "epochs": 5 }},
                    "output_dir": {:?}
                }}"#,
                data.to_str().unwrap(),
                dir.path().join("out").to_str().unwrap()
            ),
        )
        .unwrap();
        let c_config = CString::new(config.to_str().unwrap()).unwrap();
        ok(unsafe { macroxfer_run_experiment(c_config.as_ptr()) });
        assert!(dir.path().join("out/metrics.json").exists());
        assert!(dir.path().join("out/predictions.csv").exists());

        let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
        let status = unsafe { macroxfer_run_experiment(missing.as_ptr()) };
        assert_eq!(status, MacroxferStatus::ConfigError);
    }

    #[test]
    fn the_generated_header_declares_the_full_surface() {
        let header = std::fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("include/macroxfer.h"),
        )
        .unwrap();
        for symbol in [
            "macroxfer_version",
            "macroxfer_last_error",
            "macroxfer_auc",
            "macroxfer_mae",
            "macroxfer_pearson",
            "macroxfer_confusion",
            "macroxfer_chow_lin",
            "macroxfer_model_load",
            "macroxfer_model_from_json",
            "macroxfer_model_input_width",
            "macroxfer_model_is_recurrent",
            "macroxfer_model_predict",
            "macroxfer_model_predict_sequence",
            "macroxfer_model_free",
            "macroxfer_generate_regime_csv",
            "macroxfer_run_experiment",
        ] {
            assert!(header.contains(symbol), "header lacks {symbol}");
        }
        assert!(
            header.contains("typedef struct MacroxferModel MacroxferModel;"),
            "model handle must stay opaque"
        );
        assert!(header.contains("MACROXFER_H"));
    }
}
