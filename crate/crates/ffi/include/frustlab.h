#ifndef FRUSTLAB_H
#define FRUSTLAB_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum FlStatus {
  FL_STATUS_OK = 0,
  FL_STATUS_NULL_POINTER = 1,
  FL_STATUS_INVALID_ARGUMENT = 2,
  FL_STATUS_DIMENSION_MISMATCH = 3,
  FL_STATUS_NUMERICAL = 4,
  FL_STATUS_IO = 5,
  FL_STATUS_PARSE = 6,
  FL_STATUS_CONFIG = 7,
  // A suite finished but some rows failed.
  FL_STATUS_NULL_ROWS = 8,
  FL_STATUS_PANIC = 9,
} FlStatus;

// Opaque experiment configuration handle.
typedef struct FlConfig FlConfig;

// Opaque dataset handle.
typedef struct FlDataset FlDataset;

// Outcome of a paired signed-rank test.
typedef struct FlTestResult {
  size_t n_eff;
  double statistic;
  double p_two_sided;
  double hl_estimate;
  double ci_low;
  double ci_high;
  // 1 when the exact null distribution was used, 0 for the normal approximation.
  int32_t exact;
} FlTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *fl_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *fl_version(void);

// Reads an embedding file.
//
// # Safety
// `path` must be a NUL-terminated string and `out_dataset` a valid pointer.
enum FlStatus fl_dataset_load(const char *path, struct FlDataset **out_dataset);

// Generates a linear-Gaussian dataset whose first `k_known` concept columns
// are known.
//
// # Safety
// `out_dataset` must be a valid pointer.
enum FlStatus fl_dataset_synthetic(size_t n,
                                   size_t k,
                                   size_t k_known,
                                   size_t r,
                                   double sigma_a,
                                   double sigma_y,
                                   double alpha,
                                   double omega,
                                   uint64_t seed,
                                   struct FlDataset **out_dataset);

// Writes a dataset as an embedding file.
//
// # Safety
// `dataset` must come from this library and `path` be NUL-terminated.
enum FlStatus fl_dataset_write(const struct FlDataset *dataset, const char *path);

// Number of rows, activation dimension and concept columns.
//
// # Safety
// `dataset` must come from this library; output pointers may be null.
enum FlStatus fl_dataset_shape(const struct FlDataset *dataset, size_t *n, size_t *r, size_t *k);

// Releases a dataset. Null is ignored.
//
// # Safety
// `dataset` must come from this library and not be used afterwards.
void fl_dataset_free(struct FlDataset *dataset);

// Global frustration of the `k_known x r` concept map `q` against the
// `k_sae x r` dictionary `d`. `form` is an `r x r` quadratic form, or null
// for the Euclidean geometry.
//
// # Safety
// Buffers must hold the stated number of doubles; `out_gamma` must be valid.
enum FlStatus fl_global_frustration(const double *q,
                                    size_t k_known,
                                    const double *d,
                                    size_t k_sae,
                                    const double *form,
                                    size_t r,
                                    double *out_gamma);

// Closed-form Bayes accuracy of a concept-based classifier.
//
// `b_known` is `k_known x k_known`, `b_temp` is `k_unknown x k_unknown`,
// `psi_star` has `k_known + k_unknown` entries. Unknown concepts mediate
// known pairs in the default cyclic assignment.
//
// # Safety
// Buffers must hold the stated number of doubles; `out_accuracy` must be valid.
enum FlStatus fl_closed_form_accuracy(const double *b_known,
                                      size_t k_known,
                                      const double *b_temp,
                                      size_t k_unknown,
                                      double alpha,
                                      const double *psi_star,
                                      double omega,
                                      double sigma_y,
                                      double *out_accuracy);

// Paired Wilcoxon signed-rank test of `a - b` with a 95% Hodges-Lehmann
// interval.
//
// # Safety
// `a` and `b` must hold `n` doubles; `out_result` must be valid.
enum FlStatus fl_wilcoxon_paired(const double *a,
                                 const double *b,
                                 size_t n,
                                 struct FlTestResult *out_result);

// Creates a configuration from a preset name (`paper` or `quick`).
//
// # Safety
// `preset` must be NUL-terminated and `out_config` valid.
enum FlStatus fl_config_new(const char *preset, struct FlConfig **out_config);

// Applies one `section.key=value` override, e.g. `globe.reps=3`.
//
// # Safety
// `config` must come from this library and `assignment` be NUL-terminated.
enum FlStatus fl_config_set(struct FlConfig *config, const char *assignment);

// Releases a configuration. Null is ignored.
//
// # Safety
// `config` must come from this library and not be used afterwards.
void fl_config_free(struct FlConfig *config);

// Runs a suite (`globe`, `synthetic`, `realworld`, `fisher-window` or
// `theory-check`) and writes its output files into `out_dir`. `realworld`
// needs `realworld.input` to be set. Returns `NullRows` when the suite
// completed with failed rows.
//
// # Safety
// `config` must come from this library; strings must be NUL-terminated.
enum FlStatus fl_run_suite(const struct FlConfig *config, const char *suite, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRUSTLAB_H */
