#ifndef SHELAB_H
#define SHELAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `SHELAB_STATUS_OK` is zero.
 */
typedef enum ShelabStatus {
  SHELAB_STATUS_OK = 0,
  SHELAB_STATUS_DOMAIN = 1,
  SHELAB_STATUS_TRUNCATION = 2,
  SHELAB_STATUS_ALIASING = 3,
  SHELAB_STATUS_DIMENSION = 4,
  SHELAB_STATUS_EVALUATION = 5,
  SHELAB_STATUS_HYPOTHESIS = 6,
  SHELAB_STATUS_INCONCLUSIVE = 7,
  SHELAB_STATUS_CONFIG = 8,
  SHELAB_STATUS_IO = 9,
  /**
   * A required pointer argument was null.
   */
  SHELAB_STATUS_NULL_POINTER = 10,
  /**
   * The library panicked; the message holds the payload.
   */
  SHELAB_STATUS_PANIC = 11,
} ShelabStatus;

typedef enum ShelabBoundary {
  SHELAB_BOUNDARY_NEUMANN = 0,
  SHELAB_BOUNDARY_DIRICHLET = 1,
} ShelabBoundary;

/**
 * Opaque model handle.
 */
typedef struct ShelabModel ShelabModel;

/**
 * Time discretisation. Obtain defaults from [`shelab_scheme_default`].
 */
typedef struct ShelabScheme {
  double horizon;
  size_t steps;
  size_t max_mode;
  /**
   * Collocation points, at least `2 * max_mode + 2`.
   */
  size_t grid;
  /**
   * The reference path uses `steps * 2^ref_refinement` steps.
   */
  uint32_t ref_refinement;
  bool strict;
} ShelabScheme;

/**
 * Mean and variance of a normal law.
 */
typedef struct ShelabGaussian {
  double mean;
  double variance;
} ShelabGaussian;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *shelab_version(void);

/**
 * Copies the last error message of the calling thread into `buf`
 * (truncated, always NUL-terminated when `len > 0`). Returns the full
 * message length without the terminator, or 0 if there is none.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null with `len == 0`.
 */
size_t shelab_last_error_message(char *buf, size_t len);

/**
 * Green function `G_t(x, y)` at the default accuracy.
 *
 * # Safety
 * `out` must point to a writable `double`.
 */
enum ShelabStatus shelab_green_eval(enum ShelabBoundary bc,
                                    double t,
                                    double x,
                                    double y,
                                    double *out);

/**
 * `∫_0^1 G_t(x, y)² dy`.
 *
 * # Safety
 * `out` must point to a writable `double`.
 */
enum ShelabStatus shelab_green_sq_integral(enum ShelabBoundary bc, double t, double x, double *out);

struct ShelabScheme shelab_scheme_default(void);

/**
 * Model with drift `slope * u + offset` and constant initial datum `u0`.
 *
 * # Safety
 * `out` must point to a writable handle slot. The handle must be released
 * with [`shelab_model_free`].
 */
enum ShelabStatus shelab_model_new_affine(enum ShelabBoundary bc,
                                          double slope,
                                          double offset,
                                          double sigma,
                                          double u0,
                                          struct ShelabModel **out);

/**
 * Model with drift `scale * sin(u)` and constant initial datum `u0`.
 *
 * # Safety
 * As for [`shelab_model_new_affine`].
 */
enum ShelabStatus shelab_model_new_sine(enum ShelabBoundary bc,
                                        double scale,
                                        double sigma,
                                        double u0,
                                        struct ShelabModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from a `shelab_model_new_*` call and not be freed twice.
 */
void shelab_model_free(struct ShelabModel *model);

/**
 * Terminal state `u^δ(T, x_j)` of path `path` on the `scheme->grid`
 * midpoints `x_j = (j + 1/2)/grid`.
 *
 * # Safety
 * `model` and `scheme` must be valid; `out` must hold `out_len` doubles and
 * `out_len` must equal `scheme->grid`.
 */
enum ShelabStatus shelab_simulate_path(const struct ShelabModel *model,
                                       const struct ShelabScheme *scheme,
                                       uint64_t seed,
                                       uint64_t path,
                                       double *out,
                                       size_t out_len);

/**
 * The coupled reference state of the same path, as for
 * [`shelab_simulate_path`].
 *
 * # Safety
 * As for [`shelab_simulate_path`].
 */
enum ShelabStatus shelab_simulate_reference(const struct ShelabModel *model,
                                            const struct ShelabScheme *scheme,
                                            uint64_t seed,
                                            uint64_t path,
                                            double *out,
                                            size_t out_len);

/**
 * Exact law of `u(T, x)` for an affine model, from modes `≤ max_mode`
 * plus, if `continuum_tail`, the stationary variance of the rest.
 *
 * # Safety
 * `model` must be valid and `out` writable.
 */
enum ShelabStatus shelab_affine_exact_law(const struct ShelabModel *model,
                                          double horizon,
                                          double x,
                                          size_t max_mode,
                                          bool continuum_tail,
                                          struct ShelabGaussian *out);

/**
 * Law of the scheme's terminal value `u^δ(T, x)` for an affine model.
 *
 * # Safety
 * `model` and `scheme` must be valid and `out` writable.
 */
enum ShelabStatus shelab_affine_perturbed_law(const struct ShelabModel *model,
                                              const struct ShelabScheme *scheme,
                                              double x,
                                              bool continuum_tail,
                                              struct ShelabGaussian *out);

/**
 * Default KDE variance parameter for `n` samples.
 */
double shelab_bandwidth(size_t n);

/**
 * Gaussian kernel density estimate with variance `zeta` on a strictly
 * increasing grid of `grid_len` points, written to `out`.
 *
 * # Safety
 * `samples` must hold `n` doubles, `grid` and `out` `grid_len` doubles each.
 */
enum ShelabStatus shelab_kde(const double *samples,
                             size_t n,
                             double zeta,
                             const double *grid,
                             size_t grid_len,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHELAB_H */
