#ifndef AITSAHALIA_H
#define AITSAHALIA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum AsStatus {
  AS_STATUS_OK = 0,
  AS_STATUS_NULL_POINTER = 1,
  AS_STATUS_INVALID_ARGUMENT = 2,
  AS_STATUS_NUMERIC_OVERFLOW = 3,
  AS_STATUS_SIMULATION_FAILURE = 4,
  AS_STATUS_BUFFER_TOO_SMALL = 5,
  AS_STATUS_PANIC = 6,
} AsStatus;

typedef enum AsRegime {
  AS_REGIME_NON_CRITICAL = 0,
  AS_REGIME_CRITICAL_SUPPORTED = 1,
  AS_REGIME_CRITICAL_UNSUPPORTED = 2,
  AS_REGIME_INVALID = 3,
} AsRegime;

typedef enum AsCorrection {
  AS_CORRECTION_IDENTITY = 0,
  AS_CORRECTION_TAMED = 1,
  AS_CORRECTION_PROJECTED = 2,
} AsCorrection;

typedef enum AsScheme {
  AS_SCHEME_TEM = 0,
  AS_SCHEME_PEM = 1,
  AS_SCHEME_BEM = 2,
  AS_SCHEME_EXPLICIT_IDENTITY = 3,
} AsScheme;

/**
 * Validated parameters and jump coefficient.
 */
typedef struct AsModel AsModel;

typedef struct AsReport AsReport;

typedef struct AsTrajectory AsTrajectory;

/**
 * Model constants plus the jump scale `c` in `nu(x) = c x`.
 */
typedef struct AsParams {
  double alpha_m1;
  double alpha0;
  double alpha1;
  double alpha2;
  double sigma;
  double r;
  double rho;
  double lambda;
  double x0;
  double jump_scale;
} AsParams;

/**
 * Error study settings. Schemes are chosen with a bit mask over
 * [`AsScheme`] values (`1 << AS_SCHEME_TEM | ...`).
 */
typedef struct AsExperiment {
  double horizon;
  double h_exact;
  const double *h_list;
  size_t h_count;
  size_t n_paths;
  uint64_t seed;
  uint32_t scheme_mask;
} AsExperiment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread; empty after success.
 */
const char *as_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *as_version(void);

/**
 * Fills `out` with the first built-in parameter set (`which = 1`) or the
 * second (`which = 2`).
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum AsStatus as_params_preset(uint32_t which, struct AsParams *out);

/**
 * # Safety
 * `params` must be null or point to an `AsParams`; `out` must be null or
 * valid for writes.
 */
enum AsStatus as_model_new(const struct AsParams *params, struct AsModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`as_model_new`] not yet freed.
 */
void as_model_free(struct AsModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out` must be valid for writes.
 */
enum AsStatus as_model_regime(const struct AsModel *model, enum AsRegime *out);

/**
 * One step of the semi-implicit explicit scheme. `kappa` is used only for
 * the projected correction; pass a value `<= 0` for the default.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid for writes.
 */
enum AsStatus as_explicit_step(const struct AsModel *model,
                               enum AsCorrection correction,
                               double kappa,
                               double y,
                               double h,
                               double dw,
                               uint32_t dn,
                               double *out);

/**
 * One drift-implicit backward Euler step.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid for writes.
 */
enum AsStatus as_bem_step(const struct AsModel *model,
                          double y,
                          double h,
                          double dw,
                          uint32_t dn,
                          double *out);

/**
 * Simulates one path of `n_steps` steps from the model's `x0`, driven by
 * the noise of `(seed, path_index)`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid for writes.
 */
enum AsStatus as_simulate(const struct AsModel *model,
                          enum AsScheme scheme,
                          double h,
                          size_t n_steps,
                          uint64_t seed,
                          uint64_t path_index,
                          struct AsTrajectory **out);

/**
 * Number of stored values (steps + 1); 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t as_trajectory_len(const struct AsTrajectory *t);

/**
 * Copies the values into `buf` (capacity `cap`).
 *
 * # Safety
 * `t` must be a live handle; `buf` must be valid for `cap` writes.
 */
enum AsStatus as_trajectory_values(const struct AsTrajectory *t, double *buf, size_t cap);

/**
 * # Safety
 * `t` must be null or a handle from [`as_simulate`] not yet freed.
 */
void as_trajectory_free(struct AsTrajectory *t);

/**
 * Runs the mean-square error study against a backward Euler reference.
 * `workers = 0` uses every available core.
 *
 * # Safety
 * `model` must be a live handle; `cfg` must point to an `AsExperiment`
 * whose `h_list` holds `h_count` values; `out` must be valid for writes.
 */
enum AsStatus as_convergence(const struct AsModel *model,
                             const struct AsExperiment *cfg,
                             size_t workers,
                             struct AsReport **out);

/**
 * # Safety
 * `r` must be null or a live handle.
 */
size_t as_report_scheme_count(const struct AsReport *r);

/**
 * # Safety
 * `r` must be null or a live handle.
 */
size_t as_report_level_count(const struct AsReport *r);

/**
 * Fitted rate of scheme `i`. `q` and `resid` are NaN when no fit exists.
 *
 * # Safety
 * `r` must be a live handle; the out-pointers must be valid for writes.
 */
enum AsStatus as_report_rate(const struct AsReport *r,
                             size_t i,
                             enum AsScheme *scheme,
                             double *q,
                             double *resid);

/**
 * Error estimate of scheme `i` at step index `level`.
 *
 * # Safety
 * `r` must be a live handle; the out-pointers must be valid for writes.
 */
enum AsStatus as_report_error(const struct AsReport *r,
                              size_t i,
                              size_t level,
                              double *h,
                              double *e_h,
                              double *stderr);

/**
 * # Safety
 * `r` must be null or a handle from [`as_convergence`] not yet freed.
 */
void as_report_free(struct AsReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AITSAHALIA_H */
