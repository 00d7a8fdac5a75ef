/* C interface of the grnscale toolkit. Regenerated by the build script. */

#pragma once

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum GrnScaleStatus {
  GRN_SCALE_STATUS_OK = 0,
  GRN_SCALE_STATUS_NULL_POINTER = 1,
  GRN_SCALE_STATUS_INVALID_ARGUMENT = 2,
  GRN_SCALE_STATUS_DOMAIN_ERROR = 3,
  GRN_SCALE_STATUS_NO_CONVERGENCE = 4,
  GRN_SCALE_STATUS_NUMERIC_FAILURE = 5,
  GRN_SCALE_STATUS_PANIC = 6,
} GrnScaleStatus;

/**
 * Attractor classification returned by `grnscale_simulate_verdict`.
 */
typedef enum GrnScaleVerdict {
  GRN_SCALE_VERDICT_EQUILIBRIUM = 0,
  GRN_SCALE_VERDICT_LIMIT_CYCLE = 1,
  GRN_SCALE_VERDICT_UNDECIDED = 2,
} GrnScaleVerdict;

/**
 * Opaque parameter handle.
 */
typedef struct GrnScaleParams GrnScaleParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create a parameter handle. On success writes the new handle into `out`
 * and returns `OK`; the handle must be released with
 * [`grnscale_params_free`].
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GrnScaleStatus grnscale_params_new(double gamma,
                                        double delta,
                                        double xi_a,
                                        double xi_b,
                                        double sigma,
                                        double eps,
                                        struct GrnScaleParams **out);

/**
 * Release a handle created by [`grnscale_params_new`]. A null pointer is a
 * no-op.
 *
 * # Safety
 * `params` must be null or a pointer obtained from
 * [`grnscale_params_new`] that has not been freed yet.
 */
void grnscale_params_free(struct GrnScaleParams *params);

/**
 * The Hopf-ray coefficient `alpha = gamma (1 + delta) / (delta (1 + gamma))`.
 *
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum GrnScaleStatus grnscale_alpha(const struct GrnScaleParams *params, double *out);

/**
 * Increasing Hill function `p^n / (p^n + theta^n)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GrnScaleStatus grnscale_hill_plus(double p, double theta, double n, double *out);

/**
 * The Hopf threshold `mu_Hopf(sigma)` at the handle's `(gamma, delta,
 * xi_a, xi_b)`.
 *
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum GrnScaleStatus grnscale_mu_hopf(const struct GrnScaleParams *params,
                                     double sigma,
                                     double *out);

/**
 * Solve the unique equilibrium. Writes `(r_a, r_b, p_a, p_b)` into
 * `out_state` and the eigenvalues of the Jacobian into `out_eig_re` /
 * `out_eig_im` (sorted by descending real part).
 *
 * # Safety
 * All pointers must be valid; the arrays must have room for 4 doubles.
 */
enum GrnScaleStatus grnscale_solve_equilibrium(const struct GrnScaleParams *params,
                                               double *out_state,
                                               double *out_eig_re,
                                               double *out_eig_im);

/**
 * Closed-form first-return map of the switching-limit system on
 * `{p_a = 1, p_b > 1}`.
 *
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum GrnScaleStatus grnscale_poincare_map(const struct GrnScaleParams *params,
                                          double p_b0,
                                          double *out);

/**
 * First and second derivatives of the return map at the corner value 1.
 *
 * # Safety
 * All pointers must be valid.
 */
enum GrnScaleStatus grnscale_poincare_derivatives(const struct GrnScaleParams *params,
                                                  double *out_first,
                                                  double *out_second);

/**
 * Integrate the full system from `y0[4]` to `t_end` at tolerance `tol` and
 * classify the attractor. `out_period` and `out_amplitude` are zero unless
 * the verdict is a limit cycle.
 *
 * # Safety
 * All pointers must be valid; `y0` must point to 4 doubles.
 */
enum GrnScaleStatus grnscale_simulate_verdict(const struct GrnScaleParams *params,
                                              const double *y0,
                                              double t_end,
                                              double tol,
                                              enum GrnScaleVerdict *out_verdict,
                                              double *out_period,
                                              double *out_amplitude);

/**
 * Library version as a static NUL-terminated string.
 */
const char *grnscale_version(void);

/**
 * Static description of a status code.
 */
const char *grnscale_status_message(enum GrnScaleStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
