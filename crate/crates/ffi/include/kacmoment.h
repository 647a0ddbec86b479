#ifndef KACMOMENT_H
#define KACMOMENT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum KmStatus {
  KM_STATUS_OK = 0,
  /**
   * A point outside the state space.
   */
  KM_STATUS_DOMAIN = 1,
  KM_STATUS_INVALID_ARGUMENT = 2,
  KM_STATUS_NUMERIC = 3,
  KM_STATUS_INFEASIBLE = 4,
  KM_STATUS_NONCONVERGENT = 5,
  /**
   * Malformed JSON or an invalid description.
   */
  KM_STATUS_CONFIG = 6,
  KM_STATUS_IO = 7,
  KM_STATUS_NULL_POINTER = 8,
  /**
   * A Rust panic was caught at the boundary.
   */
  KM_STATUS_INTERNAL = 9,
} KmStatus;

/**
 * Opaque transition kernel.
 */
typedef struct KmKernel KmKernel;

/**
 * Opaque Revuz measure.
 */
typedef struct KmMeasure KmMeasure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *km_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *km_version(void);

/**
 * Standard Brownian motion on the line.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum KmStatus km_kernel_brownian_new(struct KmKernel **out);

/**
 * Brownian motion with constant drift.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum KmStatus km_kernel_brownian_drift_new(double drift, struct KmKernel **out);

/**
 * Brownian motion reflected at zero.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum KmStatus km_kernel_reflected_new(struct KmKernel **out);

/**
 * Brownian motion killed on leaving `(lower, upper)`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum KmStatus km_kernel_killed_new(double lower, double upper, struct KmKernel **out);

/**
 * A kernel from its JSON description, e.g. `{"family":"brownian-drift","drift":1}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KmStatus km_kernel_from_json(const char *json, struct KmKernel **out);

/**
 * Releases a kernel; null is ignored.
 *
 * # Safety
 * `kernel` must come from a `km_kernel_*` constructor and not be used again.
 */
void km_kernel_free(struct KmKernel *kernel);

/**
 * `weight · δ_location`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum KmStatus km_measure_atom_new(double location, double weight, struct KmMeasure **out);

/**
 * `c` times Lebesgue measure.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum KmStatus km_measure_lebesgue_new(double c, struct KmMeasure **out);

/**
 * A measure from its JSON description, e.g.
 * `{"density":{"kind":"indicator","lower":0,"upper":1},"atoms":[{"location":0,"weight":1}]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KmStatus km_measure_from_json(const char *json, struct KmMeasure **out);

/**
 * Releases a measure; null is ignored.
 *
 * # Safety
 * `measure` must come from a `km_measure_*` constructor and not be used again.
 */
void km_measure_free(struct KmMeasure *measure);

/**
 * Transition density `p_t(x, y)`.
 *
 * # Safety
 * `kernel` must be a live handle and `out` a valid pointer.
 */
enum KmStatus km_density(const struct KmKernel *kernel, double t, double x, double y, double *out);

/**
 * α-potential density `r_α(x, y)`.
 *
 * # Safety
 * `kernel` must be a live handle and `out` a valid pointer.
 */
enum KmStatus km_potential_density(const struct KmKernel *kernel,
                                   double alpha,
                                   double x,
                                   double y,
                                   double *out);

/**
 * `U_α μ(x)` with its absolute error estimate.
 *
 * # Safety
 * Handles must be live; `value` and `error` must be valid pointers.
 */
enum KmStatus km_potential_of_measure(const struct KmKernel *kernel,
                                      const struct KmMeasure *measure,
                                      double alpha,
                                      double x,
                                      double *value,
                                      double *error);

/**
 * `E_x[A_t^k]` for the functional with Revuz measure `measure`, with its
 * error estimate, at default quadrature settings.
 *
 * # Safety
 * Handles must be live; `value` and `error` must be valid pointers.
 */
enum KmStatus km_kth_moment(const struct KmKernel *kernel,
                            const struct KmMeasure *measure,
                            uint32_t k,
                            double x,
                            double t,
                            double *value,
                            double *error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KACMOMENT_H */
