#ifndef PARALLEL_ANALYSIS_H
#define PARALLEL_ANALYSIS_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PaStatus {
  PA_STATUS_OK = 0,
  PA_STATUS_INVALID_ARGUMENT = 1,
  PA_STATUS_DIMENSION_MISMATCH = 2,
  PA_STATUS_NON_FINITE = 3,
  PA_STATUS_PARSE = 4,
  PA_STATUS_CONFIG = 5,
  PA_STATUS_SVD_FAILED = 6,
  PA_STATUS_IO = 7,
  PA_STATUS_NULL_POINTER = 8,
  PA_STATUS_PANIC = 9,
} PaStatus;

/**
 * Row-major dense matrix.
 */
typedef struct PaMatrix PaMatrix;

typedef struct PaSelection PaSelection;

/**
 * Selection settings. `max_rank == 0` means every rank up to `min(n, p)`.
 */
typedef struct PaSelectConfig {
  size_t num_permutations;
  double percentile;
  size_t max_rank;
  bool stepwise;
  bool demean_columns;
  uint64_t seed;
} PaSelectConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *pa_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pa_version(void);

/**
 * # Safety
 * `data` must point to `rows * cols` readable doubles in row-major order.
 */
enum PaStatus pa_matrix_new(size_t rows, size_t cols, const double *data, struct PaMatrix **out);

/**
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string.
 */
enum PaStatus pa_matrix_from_csv(const char *path, bool has_header, struct PaMatrix **out);

/**
 * # Safety
 * `m` must be null or a handle from `pa_matrix_new`/`pa_matrix_from_csv`.
 */
size_t pa_matrix_rows(const struct PaMatrix *m);

/**
 * # Safety
 * As for `pa_matrix_rows`.
 */
size_t pa_matrix_cols(const struct PaMatrix *m);

/**
 * # Safety
 * `m` must be null or a live matrix handle; it is invalid afterwards.
 */
void pa_matrix_free(struct PaMatrix *m);

/**
 * Singular values in descending order. Writes up to `cap` into `buf` and
 * stores the total count in `count`; pass a null `buf` to query the size.
 *
 * # Safety
 * `buf` must be null or hold `cap` writable doubles.
 */
enum PaStatus pa_singular_values(const struct PaMatrix *m, double *buf, size_t cap, size_t *count);

struct PaSelectConfig pa_select_config_default(void);

/**
 * Runs the selection. A null `config` uses `pa_select_config_default()`.
 *
 * # Safety
 * `m` must be a live matrix handle and `config` null or readable.
 */
enum PaStatus pa_select(const struct PaMatrix *m,
                        const struct PaSelectConfig *config,
                        struct PaSelection **out);

/**
 * # Safety
 * `s` must be null or a live selection handle.
 */
size_t pa_selection_rank(const struct PaSelection *s);

/**
 * Number of ranks compared, i.e. the length of the observed and threshold arrays.
 *
 * # Safety
 * As for `pa_selection_rank`.
 */
size_t pa_selection_len(const struct PaSelection *s);

/**
 * Copies observed singular values; returns the total available.
 *
 * # Safety
 * `s` must be null or a live selection handle; `buf` null or `cap` writable doubles.
 */
size_t pa_selection_observed(const struct PaSelection *s, double *buf, size_t cap);

/**
 * Copies permutation thresholds; returns the total available.
 *
 * # Safety
 * As for `pa_selection_observed`.
 */
size_t pa_selection_thresholds(const struct PaSelection *s, double *buf, size_t cap);

/**
 * # Safety
 * `s` must be null or a live selection handle; it is invalid afterwards.
 */
void pa_selection_free(struct PaSelection *s);

/**
 * Spike strength at which a rank-one signal separates from identity noise.
 */
enum PaStatus pa_bbp_threshold_identity(double gamma, double *out);

enum PaStatus pa_bbp_threshold_classical(double gamma, double *out);

/**
 * Upper edge 1 + sqrt(gamma) of the normalized noise spectrum.
 */
enum PaStatus pa_noise_edge(double gamma, double *out);

enum PaStatus pa_permuted_norm(double theta_total, size_t n, size_t p, double *out);

enum PaStatus pa_shadowing_ratio(size_t n, size_t p, double *out);

/**
 * # Safety
 * `v` must hold `len` readable doubles.
 */
enum PaStatus pa_c_k(const double *v, size_t len, size_t n, uint32_t k, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARALLEL_ANALYSIS_H */
