#ifndef LM_FORECAST_H
#define LM_FORECAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum LmfSplit {
  LMF_SPLIT_TRAIN = 0,
  LMF_SPLIT_VALIDATION = 1,
  LMF_SPLIT_TEST = 2,
} LmfSplit;

typedef enum LmfStatus {
  LMF_STATUS_OK = 0,
  LMF_STATUS_NULL_POINTER = 1,
  LMF_STATUS_INVALID_ARGUMENT = 2,
  LMF_STATUS_NOT_FOUND = 3,
  LMF_STATUS_IO = 4,
  /**
   * The data cannot support the request (empty, constant, too short, bad split).
   */
  LMF_STATUS_DATA = 5,
  LMF_STATUS_SOLVE_FAILURE = 6,
  LMF_STATUS_PANIC = 7,
} LmfStatus;

/**
 * Opaque heart-rate series.
 */
typedef struct LmfSeries LmfSeries;

/**
 * Opaque trained session.
 */
typedef struct LmfSession LmfSession;

typedef struct LmfSynthParams {
  uint64_t seed;
  size_t n;
  double base_bpm;
  double drift_bpm_per_ks;
  double modulation_amp;
  double modulation_period_s;
  double noise_std;
} LmfSynthParams;

typedef struct LmfCounts {
  size_t train;
  size_t validation;
  size_t test;
} LmfCounts;

/**
 * Metrics for one split. `pearson_r` and `r_squared` are NaN when undefined.
 */
typedef struct LmfMetrics {
  double mse;
  double mae;
  double mape;
  double pearson_r;
  double r_squared;
  double accuracy;
  double efficiency;
  size_t n_total;
  size_t t_train;
  size_t samples;
} LmfMetrics;

/**
 * Session settings. `lags` must point to `lag_count` values and only needs to
 * stay valid for the duration of the call that reads it. `max_fail == 0`
 * disables early stopping.
 */
typedef struct LmfSessionConfig {
  const size_t *lags;
  size_t lag_count;
  size_t hidden_units;
  double train_fraction;
  double validation_fraction;
  double test_fraction;
  size_t max_fail;
  size_t max_epochs;
  uint64_t seed;
} LmfSessionConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *lmf_last_error_message(void);

struct LmfSynthParams lmf_synth_params_default(void);

/**
 * # Safety
 * `values` must point to `len` doubles; `out` must be writable.
 */
enum LmfStatus lmf_series_from_values(const double *values, size_t len, struct LmfSeries **out);

/**
 * Loads one column (name, or 0-based index given as digits) from a CSV file,
 * dropping rows with missing or non-positive values.
 *
 * # Safety
 * `path` and `column` must be NUL-terminated strings; `out` must be writable.
 */
enum LmfStatus lmf_series_load_csv(const char *path, const char *column, struct LmfSeries **out);

/**
 * # Safety
 * `params` must be readable and `out` writable.
 */
enum LmfStatus lmf_series_synth(const struct LmfSynthParams *params, struct LmfSeries **out);

/**
 * Length of the series; 0 for a null handle.
 *
 * # Safety
 * `series` must be null or a live handle.
 */
size_t lmf_series_len(const struct LmfSeries *series);

/**
 * Borrowed pointer to the samples, valid while the handle lives.
 *
 * # Safety
 * `series` must be null or a live handle.
 */
const double *lmf_series_values(const struct LmfSeries *series);

/**
 * # Safety
 * `series` must be null or a handle not yet freed.
 */
void lmf_series_free(struct LmfSeries *series);

/**
 * Contiguous block split of `n` samples.
 *
 * # Safety
 * `out` must be writable.
 */
enum LmfStatus lmf_split_block(size_t n,
                               double train_fraction,
                               double validation_fraction,
                               double test_fraction,
                               struct LmfCounts *out);

/**
 * Exact efficiency `n_total / t_train`.
 *
 * # Safety
 * `out` must be writable.
 */
enum LmfStatus lmf_efficiency(size_t n_total, size_t t_train, double *out);

/**
 * # Safety
 * `targets` and `predictions` must point to `len` doubles; `out` must be writable.
 */
enum LmfStatus lmf_metrics_compute(const double *targets,
                                   const double *predictions,
                                   size_t len,
                                   size_t n_total,
                                   size_t t_train,
                                   struct LmfMetrics *out);

/**
 * Library defaults: lags {1, 2}, 10 hidden units, 70/15/15, max_fail 6.
 */
struct LmfSessionConfig lmf_session_config_default(void);

/**
 * Trains and evaluates one session.
 *
 * # Safety
 * `series` must be a live handle, `config` readable (with a valid `lags`
 * array) and `out` writable.
 */
enum LmfStatus lmf_session_run(const struct LmfSeries *series,
                               const struct LmfSessionConfig *config,
                               struct LmfSession **out);

/**
 * # Safety
 * `session` must be a live handle and `out` writable.
 */
enum LmfStatus lmf_session_metrics(const struct LmfSession *session,
                                   enum LmfSplit split,
                                   struct LmfMetrics *out);

/**
 * Raw-series sample counts per split.
 *
 * # Safety
 * `session` must be a live handle and `out` writable.
 */
enum LmfStatus lmf_session_split_counts(const struct LmfSession *session, struct LmfCounts *out);

/**
 * Best-validation epoch and the epoch training stopped at.
 *
 * # Safety
 * `session` must be a live handle; both outputs writable.
 */
enum LmfStatus lmf_session_epochs(const struct LmfSession *session,
                                  size_t *best_epoch,
                                  size_t *stop_epoch);

/**
 * One-step forecast in bpm from `history` (oldest first, at least max-lag values).
 *
 * # Safety
 * `session` must be a live handle, `history` must point to `len` doubles and
 * `out` must be writable.
 */
enum LmfStatus lmf_session_forecast_next(const struct LmfSession *session,
                                         const double *history,
                                         size_t len,
                                         double *out);

/**
 * Full session result as JSON. Release the string with [`lmf_string_free`].
 *
 * # Safety
 * `session` must be a live handle and `out` writable.
 */
enum LmfStatus lmf_session_to_json(const struct LmfSession *session, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void lmf_string_free(char *s);

/**
 * # Safety
 * `session` must be null or a handle not yet freed.
 */
void lmf_session_free(struct LmfSession *session);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LM_FORECAST_H */
