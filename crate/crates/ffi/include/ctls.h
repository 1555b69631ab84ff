#ifndef CTLS_H
#define CTLS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CtlsStatus {
  CTLS_STATUS_OK = 0,
  CTLS_STATUS_NULL_POINTER = 1,
  CTLS_STATUS_INVALID_ARGUMENT = 2,
  CTLS_STATUS_DIMENSION_MISMATCH = 3,
  CTLS_STATUS_NON_FINITE = 4,
  CTLS_STATUS_INVALID_PARTITION = 5,
  CTLS_STATUS_LOWER_BLOCK_SINGULAR = 6,
  CTLS_STATUS_RANK_DEFICIENT_FIXED_COLUMNS = 7,
  CTLS_STATUS_RANK_DEFICIENT_UPPER_ROWS = 8,
  /**
   * Singular system, non-convergence or a failed factorization.
   */
  CTLS_STATUS_NUMERICAL = 9,
  /**
   * The requested quantity does not exist for this estimate.
   */
  CTLS_STATUS_UNAVAILABLE = 10,
  CTLS_STATUS_PANIC = 11,
} CtlsStatus;

typedef enum CtlsMethod {
  CTLS_METHOD_TLS = 0,
  CTLS_METHOD_CTLS_COLUMNS = 1,
  CTLS_METHOD_CTLS_ROWS = 2,
  CTLS_METHOD_CTLS_ROWCOL = 3,
  CTLS_METHOD_PROJECTION = 4,
} CtlsMethod;

typedef enum CtlsMu {
  CTLS_MU_MIN = 0,
  CTLS_MU_MEAN = 1,
  CTLS_MU_MAX = 2,
} CtlsMu;

/**
 * Opaque estimator result.
 */
typedef struct CtlsEstimate CtlsEstimate;

/**
 * Opaque dense matrix.
 */
typedef struct CtlsMatrix CtlsMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next `ctls_*` call on the same thread.
 */
const char *ctls_last_error_message(void);

/**
 * Static name of a status code.
 */
const char *ctls_status_name(enum CtlsStatus status);

/**
 * Library version string.
 */
const char *ctls_version(void);

/**
 * Copies `rows * cols` row-major values into a new matrix.
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles and `out` must be
 * writable.
 */
enum CtlsStatus ctls_matrix_new(size_t rows,
                                size_t cols,
                                const double *data,
                                struct CtlsMatrix **out);

/**
 * Row count, or 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live matrix handle.
 */
size_t ctls_matrix_rows(const struct CtlsMatrix *m);

/**
 * Column count, or 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live matrix handle.
 */
size_t ctls_matrix_cols(const struct CtlsMatrix *m);

/**
 * Copies the entries row-major into `dst`, which holds `len` doubles.
 *
 * # Safety
 * `dst` must point to `len` writable doubles.
 */
enum CtlsStatus ctls_matrix_copy(const struct CtlsMatrix *m, double *dst, size_t len);

/**
 * Releases a matrix; NULL is ignored.
 *
 * # Safety
 * `m` must be NULL or a handle not yet freed.
 */
void ctls_matrix_free(struct CtlsMatrix *m);

/**
 * Estimates `X` from `A` (`m x n`) and `B` (`m x ell`) with `j` exact
 * leading rows and `k` exact leading columns.
 *
 * # Safety
 * `a` and `b` must be live matrix handles and `out` writable.
 */
enum CtlsStatus ctls_estimate(const struct CtlsMatrix *a,
                              const struct CtlsMatrix *b,
                              size_t j,
                              size_t k,
                              enum CtlsMethod method,
                              enum CtlsMu mu,
                              struct CtlsEstimate **out);

/**
 * New matrix holding the estimate `X̂` (`n x ell`).
 *
 * # Safety
 * `e` must be a live estimate handle and `out` writable.
 */
enum CtlsStatus ctls_estimate_x_hat(const struct CtlsEstimate *e, struct CtlsMatrix **out);

/**
 * Noise variance estimate.
 *
 * # Safety
 * `e` must be a live estimate handle and `out` writable.
 */
enum CtlsStatus ctls_estimate_sigma2(const struct CtlsEstimate *e, double *out);

/**
 * Shift `mu` of the projection estimator; `Unavailable` for other methods.
 *
 * # Safety
 * `e` must be a live estimate handle and `out` writable.
 */
enum CtlsStatus ctls_estimate_mu(const struct CtlsEstimate *e, double *out);

/**
 * Number of reported smallest eigenvalues (`ell`).
 *
 * # Safety
 * `e` must be NULL or a live estimate handle.
 */
size_t ctls_estimate_eig_count(const struct CtlsEstimate *e);

/**
 * Copies the smallest eigenvalues, ascending, into `dst` (`len` doubles).
 *
 * # Safety
 * `e` must be a live estimate handle and `dst` must hold `len` doubles.
 */
enum CtlsStatus ctls_estimate_eigs(const struct CtlsEstimate *e, double *dst, size_t len);

/**
 * Releases an estimate; NULL is ignored.
 *
 * # Safety
 * `e` must be NULL or a handle not yet freed.
 */
void ctls_estimate_free(struct CtlsEstimate *e);

/**
 * Seeded synthetic instance with i.i.d. Gaussian design and noise; the
 * same arguments always produce the same matrices as `ctls simulate`.
 *
 * # Safety
 * `a`, `b` and `x_true` must be writable.
 */
enum CtlsStatus ctls_simulate(size_t n,
                              size_t ell,
                              size_t j,
                              size_t k,
                              size_t m,
                              double sigma,
                              uint64_t seed,
                              struct CtlsMatrix **a,
                              struct CtlsMatrix **b,
                              struct CtlsMatrix **x_true);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTLS_H */
