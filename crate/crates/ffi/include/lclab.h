#ifndef LCLAB_H
#define LCLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LclabStatus {
  LCLAB_STATUS_OK = 0,
  LCLAB_STATUS_NULL_POINTER = 1,
  LCLAB_STATUS_INVALID_ARGUMENT = 2,
  LCLAB_STATUS_UNKNOWN_FAMILY = 3,
  LCLAB_STATUS_DIMENSION_MISMATCH = 4,
  LCLAB_STATUS_NOT_SYMMETRIC = 5,
  LCLAB_STATUS_NOT_PSD = 6,
  LCLAB_STATUS_EMPTY_SAMPLE = 7,
  LCLAB_STATUS_DEGENERATE = 8,
  LCLAB_STATUS_CONFIG = 9,
  LCLAB_STATUS_IO = 10,
  LCLAB_STATUS_PANIC = 11,
} LclabStatus;

/**
 * Opaque distribution handle.
 */
typedef struct LclabDistribution LclabDistribution;

/**
 * Opaque localization-state handle.
 */
typedef struct LclabLocalization LclabLocalization;

/**
 * Opaque sample-matrix handle (rows are draws).
 */
typedef struct LclabSample LclabSample;

/**
 * Monte-Carlo estimate with its batch-means standard error.
 */
typedef struct LclabEstimate {
  double value;
  double std_error;
  uint64_t n_samples;
  uint64_t seed;
} LclabEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *lclab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lclab_version(void);

/**
 * Create a distribution by family name (`gaussian`, `cube`, `ball`,
 * `laplace_prod`, `shifted_exp_prod`).
 *
 * # Safety
 * `family` must be a NUL-terminated string; `out` must be writable.
 */
enum LclabStatus lclab_distribution_new(const char *family,
                                        size_t dim,
                                        struct LclabDistribution **out);

/**
 * # Safety
 * `dist` must come from [`lclab_distribution_new`] or be NULL.
 */
void lclab_distribution_free(struct LclabDistribution *dist);

/**
 * Dimension of the distribution, 0 for NULL.
 *
 * # Safety
 * `dist` must be a valid handle or NULL.
 */
size_t lclab_distribution_dim(const struct LclabDistribution *dist);

/**
 * Unnormalised log-density at `point` (length `len`).
 *
 * # Safety
 * `point` must hold `len` doubles; `out` must be writable.
 */
enum LclabStatus lclab_distribution_log_density(const struct LclabDistribution *dist,
                                                const double *point,
                                                size_t len,
                                                double *out);

/**
 * Draw `count` samples.
 *
 * # Safety
 * `dist` must be valid; `out` must be writable.
 */
enum LclabStatus lclab_sample_new(const struct LclabDistribution *dist,
                                  size_t count,
                                  uint64_t seed,
                                  struct LclabSample **out);

/**
 * # Safety
 * `sample` must come from [`lclab_sample_new`] or be NULL.
 */
void lclab_sample_free(struct LclabSample *sample);

/**
 * # Safety
 * `sample` must be valid or NULL.
 */
size_t lclab_sample_rows(const struct LclabSample *sample);

/**
 * # Safety
 * `sample` must be valid or NULL.
 */
size_t lclab_sample_cols(const struct LclabSample *sample);

/**
 * Copy the row-major data into `buf`, which must hold exactly
 * `rows · cols` doubles.
 *
 * # Safety
 * `buf` must be writable for `len` doubles.
 */
enum LclabStatus lclab_sample_copy(const struct LclabSample *sample, double *buf, size_t len);

/**
 * Relative deviation between the two forms of the pair V-statistic
 * `T̂(A, B, I)` on this sample. `a`, `b` are symmetric `cols × cols`.
 *
 * # Safety
 * `a`, `b` must hold `cols²` doubles; `out` must be writable.
 */
enum LclabStatus lclab_tequ_deviation(const struct LclabSample *sample,
                                      const double *a,
                                      const double *b,
                                      double *out);

/**
 * `E⟨x,y⟩³` with `x ~ p`, `y ~ q` independent.
 *
 * # Safety
 * Handles must be valid; `out` must be writable.
 */
enum LclabStatus lclab_third_moment(const struct LclabDistribution *p,
                                    const struct LclabDistribution *q,
                                    size_t pairs,
                                    uint64_t seed,
                                    struct LclabEstimate *out);

/**
 * `T(A, B, C) = E[(xᵀAy)(xᵀBy)(xᵀCy)]` over independent pairs.
 *
 * # Safety
 * `a`, `b`, `c` must hold `n²` doubles with `n` the dimension.
 */
enum LclabStatus lclab_tensor_t(const struct LclabDistribution *dist,
                                const double *a,
                                const double *b,
                                const double *c,
                                size_t pairs,
                                uint64_t seed,
                                struct LclabEstimate *out);

/**
 * `E(‖x‖ − √n)²`.
 *
 * # Safety
 * `dist` must be valid; `out` must be writable.
 */
enum LclabStatus lclab_thin_shell(const struct LclabDistribution *dist,
                                  size_t samples,
                                  uint64_t seed,
                                  struct LclabEstimate *out);

/**
 * Halfspace Cheeger proxy over `directions` random directions.
 *
 * # Safety
 * `dist` must be valid; `out` must be writable.
 */
enum LclabStatus lclab_halfspace_cheeger(const struct LclabDistribution *dist,
                                         size_t directions,
                                         size_t samples,
                                         uint64_t seed,
                                         double *out);

/**
 * Empirical `W_p` between two scalar samples.
 *
 * # Safety
 * `a` and `b` must hold `na` and `nb` doubles.
 */
enum LclabStatus lclab_wasserstein(const double *a,
                                   size_t na,
                                   const double *b,
                                   size_t nb,
                                   double p,
                                   double *out);

/**
 * Weighted particle cloud of `particles` draws from `dist`.
 *
 * # Safety
 * `dist` must be valid; `out` must be writable.
 */
enum LclabStatus lclab_localization_new(const struct LclabDistribution *dist,
                                        size_t particles,
                                        uint64_t seed,
                                        struct LclabLocalization **out);

/**
 * Closed-form state for a standard Gaussian in dimension `dim`.
 *
 * # Safety
 * `out` must be writable.
 */
enum LclabStatus lclab_localization_new_gaussian(size_t dim, struct LclabLocalization **out);

/**
 * # Safety
 * `state` must come from a localization constructor or be NULL.
 */
void lclab_localization_free(struct LclabLocalization *state);

/**
 * Halt threshold as a fraction of the particle count.
 *
 * # Safety
 * `state` must be valid.
 */
enum LclabStatus lclab_localization_set_ess_fraction(struct LclabLocalization *state,
                                                     double fraction);

/**
 * Advance by `dt` with the Brownian increment `dw` (length = dimension).
 * Returns `Degenerate` when the effective sample size falls below the
 * floor; the state is still updated.
 *
 * # Safety
 * `dw` must hold `len` doubles.
 */
enum LclabStatus lclab_localization_step(struct LclabLocalization *state,
                                         double dt,
                                         const double *dw,
                                         size_t len);

/**
 * Current time, NaN for NULL.
 *
 * # Safety
 * `state` must be valid or NULL.
 */
double lclab_localization_time(const struct LclabLocalization *state);

/**
 * Effective sample size, NaN for NULL.
 *
 * # Safety
 * `state` must be valid or NULL.
 */
double lclab_localization_ess(const struct LclabLocalization *state);

/**
 * Copy the tilted mean into `buf` (length = dimension).
 *
 * # Safety
 * `buf` must be writable for `len` doubles.
 */
enum LclabStatus lclab_localization_mean(const struct LclabLocalization *state,
                                         double *buf,
                                         size_t len);

/**
 * Copy the tilted covariance, row-major, into `buf` (length `n²`).
 *
 * # Safety
 * `buf` must be writable for `len` doubles.
 */
enum LclabStatus lclab_localization_covariance(const struct LclabLocalization *state,
                                               double *buf,
                                               size_t len);

/**
 * `Tr((A − I)^q)` of the current covariance, `q` even.
 *
 * # Safety
 * `out` must be writable.
 */
enum LclabStatus lclab_localization_potential(const struct LclabLocalization *state,
                                              uint32_t q,
                                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LCLAB_H */
