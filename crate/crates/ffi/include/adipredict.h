/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef ADIPREDICT_H
#define ADIPREDICT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum AdpStatus {
  ADP_STATUS_OK = 0,
  ADP_STATUS_NULL_POINTER = 1,
  ADP_STATUS_INVALID_ARGUMENT = 2,
  ADP_STATUS_IO = 3,
  ADP_STATUS_PARSE = 4,
  ADP_STATUS_DIMENSION_MISMATCH = 5,
  ADP_STATUS_NOT_INVERTIBLE = 6,
  ADP_STATUS_SINGULAR_DESIGN = 7,
  ADP_STATUS_TIMEOUT = 8,
  ADP_STATUS_TRAINING_FAILED = 9,
  ADP_STATUS_UNKNOWN_NAME = 10,
  ADP_STATUS_PANIC = 11,
} AdpStatus;

// Mask class of a pixel.
typedef enum AdpFatClass {
  ADP_FAT_CLASS_EPICARDIAL = 0,
  ADP_FAT_CLASS_MEDIASTINAL = 1,
  ADP_FAT_CLASS_PERICARDIUM = 2,
  ADP_FAT_CLASS_OTHER_FAT = 3,
  ADP_FAT_CLASS_BACKGROUND = 4,
} AdpFatClass;

typedef enum AdpMetricStatus {
  ADP_METRIC_STATUS_OK = 0,
  ADP_METRIC_STATUS_RHO_UNDEFINED = 1,
  ADP_METRIC_STATUS_DENOMINATOR_ZERO = 2,
} AdpMetricStatus;

// Rendering of a ranking report.
typedef enum AdpReportFormat {
  // Display-precision table, comma separated.
  ADP_REPORT_FORMAT_TABLE_CSV = 0,
  // Display-precision table, aligned text.
  ADP_REPORT_FORMAT_TABLE_TEXT = 1,
  // Full-precision report CSV with header comments.
  ADP_REPORT_FORMAT_FULL_CSV = 2,
} AdpReportFormat;

// A loaded dataset bound to one prediction task.
typedef struct AdpDataset AdpDataset;

// A trained, loaded or fixed regression model.
typedef struct AdpModel AdpModel;

// Result of a cross-validation run.
typedef struct AdpReport AdpReport;

// Pooled evaluation measures. `rho` is meaningful only when `has_rho`;
// `rae_pct` and `rrse_pct` only when `has_relative`.
typedef struct AdpEvalReport {
  double rho;
  double mae;
  double rmse;
  double rae_pct;
  double rrse_pct;
  size_t n;
  bool has_rho;
  bool has_relative;
  enum AdpMetricStatus status;
} AdpEvalReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *adp_last_error_message(void);

// Library version as a static string.
const char *adp_version(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void adp_string_free(char *s);

// Nearest canonical mask class of an RGB pixel.
//
// # Safety
// `out` must be NULL or valid for writes.
enum AdpStatus adp_classify_pixel(uint8_t r, uint8_t g, uint8_t b, enum AdpFatClass *out);

// Volume in mm³ of `count` voxels of size `dx × dy × dz` mm.
//
// # Safety
// `out` must be NULL or valid for writes.
enum AdpStatus adp_counts_to_volume(double count, double dx, double dy, double dz, double *out);

// Pooled evaluation of `n` (predicted, actual) pairs.
//
// # Safety
// `predicted` and `actual` must point to `n` doubles; `out` must be valid
// for writes.
enum AdpStatus adp_evaluate(const double *predicted,
                            const double *actual,
                            size_t n,
                            struct AdpEvalReport *out);

// Loads a dataset CSV for `task` (e.g. `"mediastinal-from-epicardial"`).
//
// # Safety
// `path` and `task` must be NUL-terminated strings; `out` valid for writes.
enum AdpStatus adp_dataset_load(const char *path, const char *task, struct AdpDataset **out);

// Number of instances.
//
// # Safety
// `d` must be a live dataset handle; `out` valid for writes.
enum AdpStatus adp_dataset_len(const struct AdpDataset *d, size_t *out);

// Number of features of the dataset's task.
//
// # Safety
// `d` must be a live dataset handle; `out` valid for writes.
enum AdpStatus adp_dataset_n_features(const struct AdpDataset *d, size_t *out);

// Releases a dataset. NULL is ignored.
//
// # Safety
// `d` must come from [`adp_dataset_load`] and not have been freed.
void adp_dataset_free(struct AdpDataset *d);

// One of the published equations: `"fixed:eq8"`, `"fixed:eq9"`, `"fixed:eq10"`.
//
// # Safety
// `id` must be a NUL-terminated string; `out` valid for writes.
enum AdpStatus adp_model_fixed(const char *id, struct AdpModel **out);

// Fits `algorithm` (a selection string such as `"knn:k=3"`) on the whole
// dataset.
//
// # Safety
// `d` must be a live dataset handle; `algorithm` a NUL-terminated string;
// `out` valid for writes.
enum AdpStatus adp_model_train(const struct AdpDataset *d,
                               const char *algorithm,
                               uint64_t seed,
                               struct AdpModel **out);

// Reads a model file written by [`adp_model_save`] or the CLI.
//
// # Safety
// `path` must be a NUL-terminated string; `out` valid for writes.
enum AdpStatus adp_model_load(const char *path, struct AdpModel **out);

// Writes the model in the plain-text model format.
//
// # Safety
// `m` must be a live model handle; `path` a NUL-terminated string.
enum AdpStatus adp_model_save(const struct AdpModel *m, const char *path);

// Number of inputs the model expects.
//
// # Safety
// `m` must be a live model handle; `out` valid for writes.
enum AdpStatus adp_model_n_features(const struct AdpModel *m, size_t *out);

// Name of input `index`. The string is owned by the model handle.
//
// # Safety
// `m` must be a live model handle; `out` valid for writes.
enum AdpStatus adp_model_feature_name(const struct AdpModel *m, size_t index, const char **out);

// Name of the predicted quantity. The string is owned by the model handle.
//
// # Safety
// `m` must be a live model handle; `out` valid for writes.
enum AdpStatus adp_model_target_name(const struct AdpModel *m, const char **out);

// Raw (unclamped) prediction for one input row in feature order.
//
// # Safety
// `m` must be a live model handle; `x` must point to `n` doubles; `out`
// valid for writes.
enum AdpStatus adp_model_predict(const struct AdpModel *m, const double *x, size_t n, double *out);

// Solves a linear model for one of its inputs; the old target takes that
// input's position.
//
// # Safety
// `m` must be a live model handle; `solve_for` a NUL-terminated string;
// `out` valid for writes.
enum AdpStatus adp_model_invert(const struct AdpModel *m,
                                const char *solve_for,
                                struct AdpModel **out);

// Releases a model. NULL is ignored.
//
// # Safety
// `m` must come from this library and not have been freed.
void adp_model_free(struct AdpModel *m);

// Cross-validates a comma-separated algorithm list (as accepted by the
// CLI's `--algorithms`) on the dataset's task.
//
// # Safety
// `d` must be a live dataset handle; `algorithms` a NUL-terminated string;
// `out` valid for writes.
enum AdpStatus adp_run_cv(const struct AdpDataset *d,
                          const char *algorithms,
                          size_t folds,
                          uint64_t seed,
                          double budget_s,
                          struct AdpReport **out);

// Number of rows (one per algorithm).
//
// # Safety
// `r` must be a live report handle; `out` valid for writes.
enum AdpStatus adp_report_len(const struct AdpReport *r, size_t *out);

// Renders the report; release the result with [`adp_string_free`].
//
// # Safety
// `r` must be a live report handle; `out` valid for writes.
enum AdpStatus adp_report_render(const struct AdpReport *r,
                                 enum AdpReportFormat format,
                                 char **out);

// Releases a report. NULL is ignored.
//
// # Safety
// `r` must come from [`adp_run_cv`] and not have been freed.
void adp_report_free(struct AdpReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADIPREDICT_H */
