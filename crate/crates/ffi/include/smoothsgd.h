#ifndef SMOOTHSGD_H
#define SMOOTHSGD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsgNoiseKind {
  /**
   * `p1` = r.
   */
  SSG_NOISE_KIND_UNIFORM = 0,
  /**
   * `p1` = s.
   */
  SSG_NOISE_KIND_GAUSSIAN = 1,
  SSG_NOISE_KIND_ZERO = 2,
  /**
   * `p1` = r, `p2` = β.
   */
  SSG_NOISE_KIND_STATE_SCALED = 3,
} SsgNoiseKind;

typedef enum SsgObjectiveKind {
  /**
   * `param` is the center.
   */
  SSG_OBJECTIVE_KIND_QUADRATIC = 0,
  /**
   * `param` is δ.
   */
  SSG_OBJECTIVE_KIND_ASYM_QUAD_BUMP = 1,
  /**
   * `param` is δ.
   */
  SSG_OBJECTIVE_KIND_SYM_BUMP = 2,
} SsgObjectiveKind;

/**
 * Result code of every call.
 */
typedef enum SsgStatus {
  SSG_STATUS_OK = 0,
  SSG_STATUS_NULL_POINTER = 1,
  SSG_STATUS_INVALID_ARGUMENT = 2,
  SSG_STATUS_REGIME_VIOLATION = 3,
  SSG_STATUS_QUADRATURE_NON_CONVERGENCE = 4,
  SSG_STATUS_NEWTON_NON_CONVERGENCE = 5,
  SSG_STATUS_NO_STATIONARY_POINT = 6,
  SSG_STATUS_DIVERGED = 7,
  SSG_STATUS_CERTIFICATE_FAILED = 8,
  SSG_STATUS_IO = 9,
  SSG_STATUS_PANIC = 10,
} SsgStatus;

/**
 * Opaque noise-law handle.
 */
typedef struct SsgNoise SsgNoise;

/**
 * Opaque objective handle.
 */
typedef struct SsgObjective SsgObjective;

/**
 * Opaque smoothed view: objective, noise and step size together.
 */
typedef struct SsgView SsgView;

/**
 * Value and first two derivatives.
 */
typedef struct SsgJet {
  double value;
  double grad;
  double hess;
} SsgJet;

typedef struct SsgCertificate {
  double lipschitz;
  double sigma1_sq;
  double sigma2;
  double c;
  double mu;
  double m1;
  double m2;
  double vstar;
  double window_lo;
  double window_hi;
  /**
   * 1 when `c > 0` and `mu > 0`.
   */
  int32_t valid;
} SsgCertificate;

typedef struct SsgTrajectory {
  double w0;
  double final_w;
  double tail_avg_w;
  double tail_avg_v;
  size_t steps;
} SsgTrajectory;

typedef struct SsgEnsembleSummary {
  double vstar;
  size_t trials;
  size_t diverged;
  double mean_abs_final;
  double se_abs_final;
  double mean_abs_tail;
  double se_abs_tail;
  double time_avg_mse;
  double se_time_avg_mse;
} SsgEnsembleSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message (NUL-terminated, possibly
 * truncated) into `buf`. Returns the full message length in bytes,
 * excluding the terminator; pass `buf = NULL` to query it.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t ssg_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ssg_version(void);

/**
 * # Safety
 * `out` must be a valid pointer; the handle written there is owned by the
 * caller.
 */
enum SsgStatus ssg_objective_new(enum SsgObjectiveKind kind,
                                 double param,
                                 struct SsgObjective **out);

/**
 * Polynomial `Σ coefficients[k] w^k`.
 *
 * # Safety
 * `coefficients` must point to `n` doubles; `out` must be valid.
 */
enum SsgStatus ssg_objective_polynomial_new(const double *coefficients,
                                            size_t n,
                                            struct SsgObjective **out);

/**
 * # Safety
 * `obj` must be NULL or a handle from `ssg_objective_new*` not yet freed.
 */
void ssg_objective_free(struct SsgObjective *obj);

/**
 * # Safety
 * `obj` and `out` must be valid.
 */
enum SsgStatus ssg_objective_eval(const struct SsgObjective *obj, double w, struct SsgJet *out);

/**
 * # Safety
 * `out` must be valid.
 */
enum SsgStatus ssg_noise_new(enum SsgNoiseKind kind, double p1, double p2, struct SsgNoise **out);

/**
 * # Safety
 * `noise` must be NULL or a live handle.
 */
void ssg_noise_free(struct SsgNoise *noise);

/**
 * The view copies what it needs; `obj` and `noise` may be freed afterwards.
 *
 * # Safety
 * `obj`, `noise` and `out` must be valid.
 */
enum SsgStatus ssg_view_new(const struct SsgObjective *obj,
                            const struct SsgNoise *noise,
                            double eta,
                            struct SsgView **out);

/**
 * # Safety
 * `view` must be NULL or a live handle.
 */
void ssg_view_free(struct SsgView *view);

/**
 * Smoothed objective and its derivatives at `v`.
 *
 * # Safety
 * `view` and `out` must be valid.
 */
enum SsgStatus ssg_view_smoothed(const struct SsgView *view, double v, struct SsgJet *out);

/**
 * Global minimizer of the smoothed objective on `[lo, hi]`.
 *
 * # Safety
 * `view` and `vstar` must be valid.
 */
enum SsgStatus ssg_view_minimize(const struct SsgView *view, double lo, double hi, double *vstar);

/**
 * `v = w - η f'(w)`; fails with `REGIME_VIOLATION` when `η > 1/(2L)`.
 *
 * # Safety
 * `view` and `out` must be valid.
 */
enum SsgStatus ssg_view_phi(const struct SsgView *view, double w, double *out);

/**
 * # Safety
 * `view` and `out` must be valid.
 */
enum SsgStatus ssg_view_phi_inverse(const struct SsgView *view, double v, double *out);

/**
 * Certifies the constants around the minimizer found in `[lo, hi]`.
 * A certificate with `valid = 0` is still written and the call returns OK.
 *
 * # Safety
 * `view` and `out` must be valid.
 */
enum SsgStatus ssg_certify(const struct SsgView *view,
                           double lo,
                           double hi,
                           size_t grid_n,
                           struct SsgCertificate *out);

/**
 * One SGD run of `steps` steps from `w0`; the tail average covers the
 * second half.
 *
 * # Safety
 * `view` and `out` must be valid.
 */
enum SsgStatus ssg_run_sgd(const struct SsgView *view,
                           size_t steps,
                           double w0,
                           uint64_t seed,
                           struct SsgTrajectory *out);

/**
 * Ensemble of `trials` runs with `w0 ~ U[w0_lo, w0_hi]` (a fixed start when
 * the bounds coincide). The minimizer is searched in `[lo, hi]`.
 * `workers = 0` uses every core; results do not depend on it.
 *
 * # Safety
 * `view` and `out` must be valid.
 */
enum SsgStatus ssg_run_ensemble(const struct SsgView *view,
                                size_t steps,
                                size_t trials,
                                double w0_lo,
                                double w0_hi,
                                double lo,
                                double hi,
                                uint64_t seed,
                                size_t workers,
                                struct SsgEnsembleSummary *out);

/**
 * Runs a named experiment preset and summarizes its ensemble.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be valid.
 */
enum SsgStatus ssg_run_preset(const char *name,
                              uint64_t seed,
                              size_t workers,
                              struct SsgEnsembleSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMOOTHSGD_H */
