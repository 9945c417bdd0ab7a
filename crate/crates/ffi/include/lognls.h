#ifndef LOGNLS_H
#define LOGNLS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call. The nonzero codes follow the CLI exit codes where they overlap.
 */
typedef enum LnsStatus {
  LNS_STATUS_OK = 0,
  LNS_STATUS_NULL_POINTER = 1,
  /**
   * Malformed input: JSON, UTF-8, or a config that fails its schema.
   */
  LNS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Well-formed input outside the admissible range.
   */
  LNS_STATUS_PHYSICAL = 3,
  /**
   * The numerics aborted (resolution, mass drift, width underflow).
   */
  LNS_STATUS_SOLVER = 4,
  LNS_STATUS_IO = 5,
  LNS_STATUS_PANIC = 6,
} LnsStatus;

typedef struct LnsClosure LnsClosure;

typedef struct LnsPotential LnsPotential;

typedef struct LnsTrajectory LnsTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library from the same thread.
 */
const char *lns_last_error(void);

/**
 * Builds a potential from JSON such as `{"kind": "harmonic", "omega": [1.0]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LnsStatus lns_potential_from_json(const char *json, struct LnsPotential **out);

/**
 * Spatial dimension, or 0 for a null handle.
 *
 * # Safety
 * `potential` must be null or a live handle.
 */
size_t lns_potential_dim(const struct LnsPotential *potential);

/**
 * `V(x)` for `x` of length `dim`.
 *
 * # Safety
 * `x` must hold `dim` values; `out` must be valid.
 */
enum LnsStatus lns_potential_value(const struct LnsPotential *potential,
                                   const double *x,
                                   size_t dim,
                                   double *out);

/**
 * # Safety
 * `potential` must be null or a handle not yet freed.
 */
void lns_potential_free(struct LnsPotential *potential);

/**
 * Integrates the classical flow from `(q0, p0)` up to `horizon`.
 *
 * # Safety
 * `q0` and `p0` must hold `dim` values; `out` must be valid.
 */
enum LnsStatus lns_trajectory_integrate(const struct LnsPotential *potential,
                                        const double *q0,
                                        const double *p0,
                                        size_t dim,
                                        double horizon,
                                        double dt,
                                        struct LnsTrajectory **out);

/**
 * Number of stored samples, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t lns_trajectory_len(const struct LnsTrajectory *traj);

/**
 * Position, momentum and action at time `t`. Any of the outputs may be null.
 *
 * # Safety
 * Non-null `q` and `p` must hold `dim` values.
 */
enum LnsStatus lns_trajectory_state(const struct LnsTrajectory *traj,
                                    double t,
                                    double *q,
                                    double *p,
                                    size_t dim,
                                    double *action);

/**
 * Largest relative energy drift along the trajectory.
 *
 * # Safety
 * `out` must be valid.
 */
enum LnsStatus lns_trajectory_energy_drift(const struct LnsTrajectory *traj, double *out);

/**
 * Time the two trajectories spend within `threshold` of each other.
 *
 * # Safety
 * `out` must be valid.
 */
enum LnsStatus lns_crossing_measure(const struct LnsTrajectory *a,
                                    const struct LnsTrajectory *b,
                                    double threshold,
                                    double *out);

/**
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void lns_trajectory_free(struct LnsTrajectory *traj);

/**
 * Gaussian closure along `traj` for the initial envelope
 * `b0 exp(-1/2 sum_j a0_j y_j^2)` and coupling `lambda`.
 *
 * # Safety
 * `a0_re` and `a0_im` must hold `dim` values; `out` must be valid.
 */
enum LnsStatus lns_closure_along(const struct LnsTrajectory *traj,
                                 const double *a0_re,
                                 const double *a0_im,
                                 size_t dim,
                                 double b0_re,
                                 double b0_im,
                                 double lambda,
                                 struct LnsClosure **out);

/**
 * Envelope value at `(t, y)`.
 *
 * # Safety
 * `y` must hold `dim` values; `re` and `im` must be valid.
 */
enum LnsStatus lns_closure_value(const struct LnsClosure *closure,
                                 double t,
                                 const double *y,
                                 size_t dim,
                                 double *re,
                                 double *im);

/**
 * `||y^beta u(t)||` in closed form.
 *
 * # Safety
 * `beta` must hold `dim` values; `out` must be valid.
 */
enum LnsStatus lns_closure_l2_moment(const struct LnsClosure *closure,
                                     double t,
                                     const size_t *beta,
                                     size_t dim,
                                     double *out);

/**
 * Largest residual of the width equation over the stored samples.
 *
 * # Safety
 * `out` must be valid.
 */
enum LnsStatus lns_closure_ode_residual(const struct LnsClosure *closure, double *out);

/**
 * # Safety
 * `closure` must be null or a handle not yet freed.
 */
void lns_closure_free(struct LnsClosure *closure);

/**
 * Runs a config file as `lognls run` would. `output_root` may be null, in
 * which case relative outputs resolve against the working directory.
 *
 * # Safety
 * Non-null arguments must be NUL-terminated strings.
 */
enum LnsStatus lns_run_config(const char *config_path, const char *output_root);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOGNLS_H */
