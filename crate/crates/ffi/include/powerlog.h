/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef POWERLOG_H
#define POWERLOG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  PL_STATUS_INVALID_ARGUMENT = 2,
  PL_STATUS_PRECONDITION = 3,
  PL_STATUS_NUMERIC_POLICY = 4,
  PL_STATUS_CONFIG = 5,
  PL_STATUS_IO = 6,
  PL_STATUS_PANIC = 7,
} PlStatus;

/**
 * A shift or skew-shift.
 */
typedef struct PlDynamics PlDynamics;

/**
 * A potential `lambda f` on the torus.
 */
typedef struct PlPotential PlPotential;

/**
 * Time-averaged amplitudes `a(n, T)` on a window `-L..=L`.
 */
typedef struct PlProfile PlProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *pl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pl_version(void);

/**
 * `lambda * sum_j cos(2 pi x_j)` on `T^nu`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PlStatus pl_potential_new_cosine(size_t nu, double lambda, struct PlPotential **out);

/**
 * Gevrey model with coefficients `exp(-|n|^{1/sigma})` for `0 < |n| <= cutoff`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PlStatus pl_potential_new_gevrey(size_t nu,
                                      double sigma,
                                      uint32_t cutoff,
                                      double lambda,
                                      struct PlPotential **out);

/**
 * Potential from its TOML description (`nu`, `lambda`, `kind`, `coefficients`).
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PlStatus pl_potential_from_toml(const char *toml, struct PlPotential **out);

/**
 * `lambda f(x)` at a point with `dim` coordinates.
 *
 * # Safety
 * `x` must point to `dim` doubles.
 */
enum PlStatus pl_potential_eval(const struct PlPotential *p,
                                const double *x,
                                size_t dim,
                                double *out);

/**
 * Rigorous bound on `sup |lambda f|`; NaN for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
double pl_potential_sup_norm(const struct PlPotential *p);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void pl_potential_free(struct PlPotential *p);

/**
 * Shift by `omega` on `T^nu`.
 *
 * # Safety
 * `omega` must point to `nu` doubles and `out` must be valid.
 */
enum PlStatus pl_dynamics_new_shift(const double *omega, size_t nu, struct PlDynamics **out);

/**
 * Skew-shift with frequency `omega` on `T^dim`, `dim >= 2`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PlStatus pl_dynamics_new_skew_shift(double omega, size_t dim, struct PlDynamics **out);

/**
 * Torus dimension; 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
size_t pl_dynamics_dim(const struct PlDynamics *d);

/**
 * # Safety
 * `d` must be null or a handle not yet freed.
 */
void pl_dynamics_free(struct PlDynamics *d);

/**
 * `ln ||A_n^{f,z}(x)||` with `z = e_re + i e_im`; negative `n` gives the left cocycle.
 *
 * # Safety
 * Handles must be live and `x` must point to `dim` doubles.
 */
enum PlStatus pl_transfer_log_norm(const struct PlPotential *f,
                                   const struct PlDynamics *d,
                                   const double *x,
                                   size_t dim,
                                   double e_re,
                                   double e_im,
                                   int64_t n,
                                   double *out);

/**
 * Monte Carlo `L_n(E)` over `num_phases` seeded phases.
 *
 * # Safety
 * Handles must be live; `mean_out` and `stderr_out` must be valid pointers.
 */
enum PlStatus pl_lyapunov(const struct PlPotential *f,
                          const struct PlDynamics *d,
                          double energy,
                          size_t n,
                          size_t num_phases,
                          uint64_t seed,
                          double *mean_out,
                          double *stderr_out);

/**
 * Amplitudes at time `t` on the window `-half_width..=half_width`. The
 * profile is returned even when it leaks; check [`pl_profile_is_valid`].
 *
 * # Safety
 * Handles must be live, `x` must point to `dim` doubles, `out` must be valid.
 */
enum PlStatus pl_profile_new_fixed(const struct PlPotential *f,
                                   const struct PlDynamics *d,
                                   const double *x,
                                   size_t dim,
                                   double t,
                                   size_t half_width,
                                   double leak_tol,
                                   struct PlProfile **out);

/**
 * Amplitudes on a window doubled until the leak is below `leak_tol`.
 * Fails with `NumericPolicy` beyond `window_cap`.
 *
 * # Safety
 * As [`pl_profile_new_fixed`].
 */
enum PlStatus pl_profile_new_adaptive(const struct PlPotential *f,
                                      const struct PlDynamics *d,
                                      const double *x,
                                      size_t dim,
                                      double t,
                                      double leak_tol,
                                      size_t window_cap,
                                      struct PlProfile **out);

/**
 * Window half-width `L`; the profile has `2L + 1` entries. 0 for null.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t pl_profile_half_width(const struct PlProfile *p);

/**
 * 1 if the truncation leak is below tolerance, 0 otherwise or for null.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
int pl_profile_is_valid(const struct PlProfile *p);

/**
 * Copies `a(-L..=L, T)` into `buf`, which must hold `2L + 1` doubles.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum PlStatus pl_profile_amplitudes(const struct PlProfile *p, double *buf, size_t len);

/**
 * `<|X|^p(T)>`.
 *
 * # Safety
 * `prof` must be live and `out` valid.
 */
enum PlStatus pl_profile_moment(const struct PlProfile *prof, double p, double *out);

/**
 * Outside probability `P(N, T)`: mass on `|n| > N`.
 *
 * # Safety
 * `prof` must be live and `out` valid.
 */
enum PlStatus pl_profile_outside(const struct PlProfile *prof, size_t n, double *out);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void pl_profile_free(struct PlProfile *p);

/**
 * Logarithm of the integral criterion at time `t` with radius
 * `N = ceil(ln(t)^gamma)`, and the log of the outside-probability bound.
 * Any of the output pointers may be null.
 *
 * # Safety
 * Handles must be live and `x` must point to `dim` doubles.
 */
enum PlStatus pl_dt_integral(const struct PlPotential *f,
                             const struct PlDynamics *d,
                             const double *x,
                             size_t dim,
                             double t,
                             double gamma,
                             double *log_value,
                             double *log_bound,
                             size_t *n_used);

/**
 * Runs an experiment from TOML text and writes its artifacts. `out_dir`
 * may be null to keep the configured directory. `all_pass` (may be null)
 * receives 1 when every summary check passed.
 *
 * # Safety
 * `config` must be NUL-terminated; `out_dir` null or NUL-terminated.
 */
enum PlStatus pl_run_experiment(const char *config, const char *out_dir, int *all_pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POWERLOG_H */
