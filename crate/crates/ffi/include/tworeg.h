#ifndef TWOREG_H
#define TWOREG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TwStatus {
  TW_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  TW_STATUS_NULL_POINTER = 1,
  /**
   * Invalid parameter, penalty or dimensions.
   */
  TW_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Input data could not be used (too few rows and the like).
   */
  TW_STATUS_DATA_ERROR = 3,
  /**
   * Rank deficiency, singular systems, non-PSD matrices.
   */
  TW_STATUS_NUMERICAL_ERROR = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  TW_STATUS_INTERNAL = 5,
} TwStatus;

/**
 * Opaque symmetric PSD covariance matrix.
 */
typedef struct TwCovariance TwCovariance;

/**
 * Opaque regression dataset.
 */
typedef struct TwDataset TwDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *tw_last_error_message(void);

const char *tw_version(void);

/**
 * Copies an `n x p` row-major design and a length-`n` response into a new dataset.
 * `design` must point to `n * p` doubles, `response` to `n` doubles and
 * `out` to writable storage for one handle.
 */
enum TwStatus tw_dataset_new(const double *design,
                             const double *response,
                             size_t n,
                             size_t p,
                             struct TwDataset **out);

/**
 * `data` must be null or a handle from `tw_dataset_new` not yet freed.
 */
void tw_dataset_free(struct TwDataset *data);

/**
 * Copies a `p x p` row-major matrix; it must be symmetric PSD.
 * `entries` must point to `p * p` doubles and `out` to writable storage for one handle.
 */
enum TwStatus tw_covariance_new(const double *entries, size_t p, struct TwCovariance **out);

/**
 * `cov` must be null or a live covariance handle.
 */
void tw_covariance_free(struct TwCovariance *cov);

/**
 * Dimension `p` of the matrix, or 0 for a null handle.
 * `cov` must be null or a live covariance handle.
 */
size_t tw_covariance_dim(const struct TwCovariance *cov);

/**
 * Writes the entries row-major into `out`, which holds `len = p * p` doubles.
 * `cov` must be a live handle and `out` must point to `len` writable doubles.
 */
enum TwStatus tw_covariance_copy(const struct TwCovariance *cov, double *out, size_t len);

/**
 * `data` must be a live handle and `out` must point to `len = p` writable doubles.
 */
enum TwStatus tw_ols_fit(const struct TwDataset *data, double *out, size_t len);

/**
 * Pointer requirements as for `tw_ols_fit`.
 */
enum TwStatus tw_ridge_fit(const struct TwDataset *data, double lambda, double *out, size_t len);

/**
 * Two-stage ridge with penalty matrix `cov`, normally the output of `tw_normalize`.
 * `data` and `cov` must be live handles; `out` must point to `len = p` writable doubles.
 */
enum TwStatus tw_tworeg_ridge_fit(const struct TwDataset *data,
                                  const struct TwCovariance *cov,
                                  double lambda,
                                  double *out,
                                  size_t len);

/**
 * Block bootstrap estimate of the OLS coefficient covariance.
 * `data` must be a live handle and `out` writable storage for one handle.
 */
enum TwStatus tw_block_bootstrap_cov(const struct TwDataset *data,
                                     size_t iterations,
                                     size_t blocks,
                                     uint64_t seed,
                                     struct TwCovariance **out);

/**
 * Cross-validated sandwich estimate over `folds` contiguous folds.
 * Pointer requirements as for `tw_block_bootstrap_cov`.
 */
enum TwStatus tw_cv_hac_cov(const struct TwDataset *data, size_t folds, struct TwCovariance **out);

/**
 * `(X'X)^{-1}` rescaled to the trace of `crude`.
 * `data` and `crude` must be live handles and `out` writable storage for one handle.
 */
enum TwStatus tw_prior_cov(const struct TwDataset *data,
                           const struct TwCovariance *crude,
                           struct TwCovariance **out);

/**
 * `crude` and `prior` must be live handles and `out` writable storage for one handle.
 */
enum TwStatus tw_shrink(const struct TwCovariance *crude,
                        const struct TwCovariance *prior,
                        double kappa,
                        double mu,
                        struct TwCovariance **out);

/**
 * Rescales `cov` so that `tr(X'X cov) = p`.
 * `data` and `cov` must be live handles and `out` writable storage for one handle.
 */
enum TwStatus tw_normalize(const struct TwDataset *data,
                           const struct TwCovariance *cov,
                           struct TwCovariance **out);

/**
 * Chooses `(kappa, mu)` on the 6 x 6 grid `{0, 0.2, ..., 1}^2` by held-out
 * block bootstrap over `folds` contiguous folds. `metric` is 0 for Frobenius
 * distance and 1 for symmetrized Gaussian KL.
 * `data` must be a live handle; `kappa` and `mu` must point to writable doubles.
 */
enum TwStatus tw_select_shrinkage(const struct TwDataset *data,
                                  size_t folds,
                                  size_t iterations,
                                  size_t blocks,
                                  uint64_t seed,
                                  uint32_t metric,
                                  double *kappa,
                                  double *mu);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWOREG_H */
