#ifndef MADEGAN_H
#define MADEGAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `MG_STATUS_OK` is zero; everything else is a failure.
 */
typedef enum MgStatus {
  MG_STATUS_OK = 0,
  MG_STATUS_NULL_POINTER = 1,
  MG_STATUS_INVALID_ARGUMENT = 2,
  MG_STATUS_DIMENSION = 3,
  MG_STATUS_PARSE = 4,
  MG_STATUS_IO = 5,
  MG_STATUS_CHECKPOINT = 6,
  MG_STATUS_DIVERGED = 7,
  MG_STATUS_NO_HEAD = 8,
  MG_STATUS_BUFFER_TOO_SMALL = 9,
  MG_STATUS_PANIC = 10,
} MgStatus;

/**
 * A loaded first-level model with an optional second-level head.
 */
typedef struct MgModel MgModel;

/**
 * Network sizes and training progress of a model.
 */
typedef struct MgModelInfo {
  size_t width;
  size_t latent;
  size_t slots;
  size_t epochs_trained;
  /**
   * Second-level branches, 0 without a head.
   */
  size_t branches;
} MgModelInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mg_version(void);

/**
 * Message of the last failure on this thread, or an empty string after a
 * success. Valid until the next call into this library on the same thread.
 */
const char *mg_last_error(void);

/**
 * Samples per beat window.
 */
size_t mg_beat_len(void);

/**
 * Loads a checkpoint file written by `train-level1` or `train-level2`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MgStatus mg_model_load(const char *path, struct MgModel **out);

/**
 * Loads a checkpoint from an in-memory copy of its bytes.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` be writable.
 */
enum MgStatus mg_model_load_bytes(const uint8_t *data, size_t len, struct MgModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from `mg_model_load*` and not be freed twice.
 */
void mg_model_free(struct MgModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum MgStatus mg_model_info(const struct MgModel *model, struct MgModelInfo *out);

/**
 * Anomaly score `‖x − G(x)‖` of `n` beats into `out[n]`. Beats are raw
 * windows; standardization happens inside.
 *
 * # Safety
 * `beats` must hold `n * 320` doubles and `out` room for `n`.
 */
enum MgStatus mg_model_score(const struct MgModel *model,
                             const double *beats,
                             size_t n,
                             double *out);

/**
 * Class probabilities `(S, V, F)` of `n` abnormal beats into `out[3n]`.
 * Fails with `MG_STATUS_NO_HEAD` for a first-level-only model.
 *
 * # Safety
 * `beats` must hold `n * 320` doubles and `out` room for `3 * n`.
 */
enum MgStatus mg_model_classify(const struct MgModel *model,
                                const double *beats,
                                size_t n,
                                double *out);

/**
 * Min-max scaling of `n ≥ 2` scores into `out[n]`.
 *
 * # Safety
 * `scores` and `out` must each hold `n` doubles.
 */
enum MgStatus mg_scale_scores(const double *scores, size_t n, double *out);

/**
 * Area under the ROC curve; a nonzero label marks a positive.
 *
 * # Safety
 * `scores` and `labels` must each hold `n` entries; `out` must be writable.
 */
enum MgStatus mg_auroc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Area under the precision-recall curve.
 *
 * # Safety
 * As for [`mg_auroc`].
 */
enum MgStatus mg_auprc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Zero-phase FIR high-pass filtering of `signal[n]` into `out[n]`.
 *
 * # Safety
 * `signal` and `out` must each hold `n` doubles.
 */
enum MgStatus mg_highpass(const double *signal,
                          size_t n,
                          double sample_rate,
                          double cutoff_hz,
                          size_t taps,
                          double *out);

/**
 * R-peak sample indices of `signal[n]`. The number found is written to
 * `count`; when it exceeds `capacity` the call fails with
 * `MG_STATUS_BUFFER_TOO_SMALL` and `peaks` is left untouched.
 *
 * # Safety
 * `signal` must hold `n` doubles, `peaks` room for `capacity` entries and
 * `count` must be writable.
 */
enum MgStatus mg_detect_r_peaks(const double *signal,
                                size_t n,
                                double sample_rate,
                                size_t *peaks,
                                size_t capacity,
                                size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MADEGAN_H */
