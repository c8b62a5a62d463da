#ifndef GEOBS_H
#define GEOBS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum GeobsStatus {
  GEOBS_STATUS_OK = 0,
  GEOBS_STATUS_NULL_POINTER = 1,
  GEOBS_STATUS_INVALID_ARGUMENT = 2,
  GEOBS_STATUS_DIMENSION_MISMATCH = 3,
  GEOBS_STATUS_OUTSIDE_DOMAIN = 4,
  GEOBS_STATUS_NUMERICAL_FAILURE = 5,
  GEOBS_STATUS_INJECTIVITY_VIOLATION = 6,
  GEOBS_STATUS_PANIC = 7,
} GeobsStatus;

/**
 * Opaque manifold handle.
 */
typedef struct GeobsManifold GeobsManifold;

/**
 * Opaque observer handle: the observer state together with the last
 * measurement it was fed.
 */
typedef struct GeobsObserver GeobsObserver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *geobs_last_error_message(void);

/**
 * Static description of a status code.
 */
const char *geobs_status_str(enum GeobsStatus status);

/**
 * Build a manifold from a JSON description such as `{"kind":"sphere2"}`
 * or `{"kind":"euclidean","dim":3}`.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GeobsStatus geobs_manifold_from_json(const char *spec_json, struct GeobsManifold **out);

/**
 * Release a manifold. Null is ignored.
 *
 * # Safety
 * `m` must come from `geobs_manifold_from_json` and not be freed twice.
 */
void geobs_manifold_free(struct GeobsManifold *m);

/**
 * Intrinsic dimension, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live manifold handle.
 */
size_t geobs_manifold_dim(const struct GeobsManifold *m);

/**
 * Number of chart coordinates, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live manifold handle.
 */
size_t geobs_manifold_coord_dim(const struct GeobsManifold *m);

/**
 * `out = exp_q(v)`.
 *
 * # Safety
 * `q`, `v` and `out` must point to `len` doubles.
 */
enum GeobsStatus geobs_exp(const struct GeobsManifold *m,
                           const double *q,
                           const double *v,
                           size_t len,
                           double tol,
                           double *out);

/**
 * `out = log_from(to)`.
 *
 * # Safety
 * `from`, `to` and `out` must point to `len` doubles.
 */
enum GeobsStatus geobs_log(const struct GeobsManifold *m,
                           const double *from,
                           const double *to,
                           size_t len,
                           double tol,
                           double *out);

/**
 * Riemannian distance between `a` and `b`.
 *
 * # Safety
 * `a` and `b` must point to `len` doubles, `out` to one.
 */
enum GeobsStatus geobs_distance(const struct GeobsManifold *m,
                                const double *a,
                                const double *b,
                                size_t len,
                                double *out);

/**
 * Parallel transport of `v` at `base` to `to` along the connecting
 * geodesic.
 *
 * # Safety
 * `base`, `v`, `to` and `out` must point to `len` doubles.
 */
enum GeobsStatus geobs_transport(const struct GeobsManifold *m,
                                 const double *base,
                                 const double *v,
                                 const double *to,
                                 size_t len,
                                 double tol,
                                 double *out);

/**
 * Sectional curvature of the plane spanned by `u` and `w` at `q`.
 *
 * # Safety
 * `q`, `u` and `w` must point to `len` doubles, `out` to one.
 */
enum GeobsStatus geobs_sectional_curvature(const struct GeobsManifold *m,
                                           const double *q,
                                           const double *u,
                                           const double *w,
                                           size_t len,
                                           double *out);

/**
 * Create an observer with gain `lambda`, first measurement `q0` and
 * initial state `xi_hat0`. The observer keeps its own reference to the
 * manifold; `m` may be freed afterwards.
 *
 * # Safety
 * `q0` and `xi_hat0` must point to `len` doubles and `out` must be valid.
 */
enum GeobsStatus geobs_observer_new(const struct GeobsManifold *m,
                                    const double *q0,
                                    const double *xi_hat0,
                                    size_t len,
                                    double lambda,
                                    double tol,
                                    struct GeobsObserver **out);

/**
 * Release an observer. Null is ignored.
 *
 * # Safety
 * `obs` must come from `geobs_observer_new` and not be freed twice.
 */
void geobs_observer_free(struct GeobsObserver *obs);

/**
 * Advance the observer by `h` to the new measurement `q_next`. On failure
 * the observer is left unchanged.
 *
 * # Safety
 * `obs` must be a live observer and `q_next` point to `len` doubles.
 */
enum GeobsStatus geobs_observer_step(struct GeobsObserver *obs,
                                     const double *q_next,
                                     size_t len,
                                     double h);

/**
 * Copy the current `ξ̂` into `out`.
 *
 * # Safety
 * `obs` must be a live observer and `out` point to `len` doubles.
 */
enum GeobsStatus geobs_observer_xi_hat(const struct GeobsObserver *obs, double *out, size_t len);

/**
 * Velocity estimate `-log_q(ξ̂) / λ` at the last measurement.
 *
 * # Safety
 * `obs` must be a live observer and `out` point to `len` doubles.
 */
enum GeobsStatus geobs_observer_velocity(const struct GeobsObserver *obs, double *out, size_t len);

/**
 * Observer clock.
 *
 * # Safety
 * `obs` must be null or a live observer.
 */
double geobs_observer_time(const struct GeobsObserver *obs);

/**
 * Run a scenario given as JSON. On success `*out_json` receives
 * `{"summary": ..., "report": ...}`, to be released with
 * [`geobs_string_free`], and `*out_exit_code` (if non-null) the CLI exit
 * code: 0 for a clean run, 2 for divergence or a breached bound.
 *
 * # Safety
 * `scenario_json` must be NUL-terminated and `out_json` valid.
 */
enum GeobsStatus geobs_run_scenario_json(const char *scenario_json,
                                         char **out_json,
                                         int32_t *out_exit_code);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void geobs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOBS_H */
