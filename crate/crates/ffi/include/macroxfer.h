#ifndef MACROXFER_H
#define MACROXFER_H

/* Generated by cbindgen from the macroxfer-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * How monthly values relate to the quarterly total they must respect.
 */
typedef enum MacroxferAggregation {
  /**
   * Each quarter is the sum of its three months.
   */
  MACROXFER_AGGREGATION_FLOW = 0,
  /**
   * Each quarter is its third month's value.
   */
  MACROXFER_AGGREGATION_STOCK = 1,
} MacroxferAggregation;

/**
 * Result of every fallible ABI call. Values 1-3 mirror the library's
 * process exit codes; 4 and 5 are boundary-specific.
 */
typedef enum MacroxferStatus {
  /**
   * The call succeeded.
   */
  MACROXFER_STATUS_OK = 0,
  /**
   * Invalid configuration or parameters.
   */
  MACROXFER_STATUS_CONFIG_ERROR = 1,
  /**
   * Invalid or inconsistent data.
   */
  MACROXFER_STATUS_DATA_ERROR = 2,
  /**
   * Training failed (for example the loss became non-finite).
   */
  MACROXFER_STATUS_TRAINING_ERROR = 3,
  /**
   * A pointer argument was null or text was not valid UTF-8.
   */
  MACROXFER_STATUS_INVALID_ARGUMENT = 4,
  /**
   * An internal invariant failed; the library caught a panic.
   */
  MACROXFER_STATUS_INTERNAL_PANIC = 5,
} MacroxferStatus;

/**
 * Opaque trained-model handle.
 */
typedef struct MacroxferModel MacroxferModel;

/**
 * Binary classification counts at a fixed threshold.
 */
typedef struct MacroxferConfusion {
  uint64_t true_negatives;
  uint64_t false_positives;
  uint64_t false_negatives;
  uint64_t true_positives;
} MacroxferConfusion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *macroxfer_version(void);

/**
 * Message describing this thread's most recent failure. Empty until a call
 * fails; overwritten by the next failure on the same thread.
 */
const char *macroxfer_last_error(void);

/**
 * Area under the ROC curve of `scores` against binary `labels` (0.0 or
 * 1.0). Both arrays hold `len` values; the result lands in `*out`.
 */
enum MacroxferStatus macroxfer_auc(const double *scores,
                                   const double *labels,
                                   uintptr_t len,
                                   double *out);

/**
 * Mean absolute error of `predictions` against `targets`.
 */
enum MacroxferStatus macroxfer_mae(const double *predictions,
                                   const double *targets,
                                   uintptr_t len,
                                   double *out);

/**
 * Pearson correlation between two equal-length series.
 */
enum MacroxferStatus macroxfer_pearson(const double *a,
                                       const double *b,
                                       uintptr_t len,
                                       double *out);

/**
 * Confusion-matrix counts of `scores` against binary `labels` at
 * `threshold` (a score >= threshold predicts the positive class).
 */
enum MacroxferStatus macroxfer_confusion(const double *scores,
                                         const double *labels,
                                         uintptr_t len,
                                         double threshold,
                                         struct MacroxferConfusion *out);

/**
 * Distribute `n_quarters` quarterly values over months using a GLS
 * regression on monthly indicators with AR(1) residuals.
 *
 * `indicators` is row-major with `n_months` rows and `n_indicators`
 * columns; the regression uses the columns exactly as given (no implicit
 * intercept) and rejects columns that are constant in-sample. `n_months`
 * must be at least `3 * n_quarters`; extra trailing rows are
 * extrapolated. Pass NaN as `rho` to pick the residual autocorrelation by
 * maximum likelihood, or a fixed value in (-1, 1).
 * `out_monthly` receives `n_months` values; `out_rho` (optional, may be
 * null) receives the autocorrelation actually used.
 */
enum MacroxferStatus macroxfer_chow_lin(const double *quarterly,
                                        uintptr_t n_quarters,
                                        const double *indicators,
                                        uintptr_t n_months,
                                        uintptr_t n_indicators,
                                        enum MacroxferAggregation aggregation,
                                        double rho,
                                        double *out_monthly,
                                        double *out_rho);

/**
 * Load a model saved as JSON by the training pipeline. On success `*out`
 * owns the handle; release it with `macroxfer_model_free`.
 */
enum MacroxferStatus macroxfer_model_load(const char *path, struct MacroxferModel **out);

/**
 * Parse a model from its JSON text instead of a file.
 */
enum MacroxferStatus macroxfer_model_from_json(const char *json, struct MacroxferModel **out);

/**
 * Number of features the model consumes per time step. Returns 0 for a
 * null handle.
 */
uintptr_t macroxfer_model_input_width(const struct MacroxferModel *model);

/**
 * 1 when the model starts with a recurrent layer and therefore accepts
 * multi-step input sequences, 0 otherwise (or for a null handle).
 */
int32_t macroxfer_model_is_recurrent(const struct MacroxferModel *model);

/**
 * Score a single feature row of `len` values (`len` must equal the
 * model's input width). A recurrent model treats the row as a one-step
 * sequence.
 */
enum MacroxferStatus macroxfer_model_predict(const struct MacroxferModel *model,
                                             const double *features,
                                             uintptr_t len,
                                             double *out);

/**
 * Score a sequence of `n_steps` feature rows, row-major with `width`
 * columns. Dense models require `n_steps == 1`; recurrent models consume
 * the whole sequence and score its final step.
 */
enum MacroxferStatus macroxfer_model_predict_sequence(const struct MacroxferModel *model,
                                                      const double *values,
                                                      uintptr_t n_steps,
                                                      uintptr_t width,
                                                      double *out);

/**
 * Release a model handle. Null is a no-op.
 */
void macroxfer_model_free(struct MacroxferModel *model);

/**
 * Write a deterministic synthetic business-cycle dataset (`n` periods,
 * five indicator columns plus a recession label) as CSV to `path`. The
 * same seed always produces the same bytes.
 */
enum MacroxferStatus macroxfer_generate_regime_csv(uint64_t seed, uintptr_t n, const char *path);

/**
 * Run a full experiment described by a JSON config file: train, evaluate,
 * and write the artifact files next to the config's `output_dir`. This is
 * the same entry point the `macroxfer run` command uses.
 */
enum MacroxferStatus macroxfer_run_experiment(const char *config_path);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MACROXFER_H */
