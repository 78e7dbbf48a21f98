#ifndef HINFSF_H
#define HINFSF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum HinfStatus {
  HINF_STATUS_OK = 0,
  HINF_STATUS_NULL_POINTER = 1,
  /**
   * Input rejected: bad dimensions, not symmetric, not Hurwitz, bad weights.
   */
  HINF_STATUS_INVALID_INPUT = 2,
  /**
   * A numeric routine failed on valid input.
   */
  HINF_STATUS_NUMERIC_FAILURE = 3,
  HINF_STATUS_BUFFER_TOO_SMALL = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  HINF_STATUS_INTERNAL = 5,
} HinfStatus;

/**
 * Opaque static feedback gain `u = l x`.
 */
typedef struct HinfGain HinfGain;

/**
 * Opaque plant `dx/dt = a x + b u + w` with `a` symmetric Hurwitz.
 */
typedef struct HinfSystem HinfSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Build a plant from row-major `a` (n x n) and `b` (n x m).
 *
 * # Safety
 * `a` and `b` must point to `n * n` and `n * m` doubles; `out` must be
 * writable. `b` may be null when `m == 0`.
 */
enum HinfStatus hinf_system_new(const double *a,
                                size_t n,
                                const double *b,
                                size_t m,
                                struct HinfSystem **out);

/**
 * # Safety
 * `sys` must come from [`hinf_system_new`] and not be freed twice.
 */
void hinf_system_free(struct HinfSystem *sys);

/**
 * # Safety
 * `sys` must be a live handle; `n` and `m` must be writable.
 */
enum HinfStatus hinf_system_dims(const struct HinfSystem *sys, size_t *n, size_t *m);

/**
 * Smallest achievable closed-loop H-infinity norm over static state feedback.
 *
 * # Safety
 * `sys` must be a live handle; `out` must be writable.
 */
enum HinfStatus hinf_optimal_gamma(const struct HinfSystem *sys, double *out);

/**
 * The optimal gain `b^T a^{-1}`.
 *
 * # Safety
 * `sys` must be a live handle; `out` must be writable.
 */
enum HinfStatus hinf_synth_optimal(const struct HinfSystem *sys, struct HinfGain **out);

/**
 * The weighted gain `r^{-1} b^T q a^{-1}`; `q` is n x n and `r` is m x m,
 * both row-major, symmetric positive definite.
 *
 * # Safety
 * `q` and `r` must point to `n * n` and `m * m` doubles.
 */
enum HinfStatus hinf_synth_weighted(const struct HinfSystem *sys,
                                    const double *q,
                                    const double *r,
                                    double pd_tol,
                                    struct HinfGain **out);

/**
 * Riccati-based gain from a gamma iteration with relative tolerance
 * `gamma_tol`. `achieved_gamma` may be null.
 *
 * # Safety
 * `sys` must be a live handle; `out` must be writable.
 */
enum HinfStatus hinf_synth_are(const struct HinfSystem *sys,
                               double gamma_tol,
                               struct HinfGain **out,
                               double *achieved_gamma);

/**
 * # Safety
 * `gain` must come from a synthesis call and not be freed twice.
 */
void hinf_gain_free(struct HinfGain *gain);

/**
 * # Safety
 * `gain` must be a live handle; `rows` and `cols` must be writable.
 */
enum HinfStatus hinf_gain_dims(const struct HinfGain *gain, size_t *rows, size_t *cols);

/**
 * Copy the gain row-major into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum HinfStatus hinf_gain_copy(const struct HinfGain *gain, double *buf, size_t len);

/**
 * H-infinity norm from `w` to `(x, u)` under `u = l x`.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum HinfStatus hinf_closed_loop_norm(const struct HinfSystem *sys,
                                      const struct HinfGain *gain,
                                      double *out);

/**
 * Whether the loop `dx/dt = (a + b l) x + w` is internally positive.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum HinfStatus hinf_closed_loop_positive(const struct HinfSystem *sys,
                                          const struct HinfGain *gain,
                                          double tol,
                                          bool *out);

/**
 * Copy the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * excluding the terminator, or 0 when there is none. `buf` may be null to
 * query the length.
 *
 * # Safety
 * `buf` must point to `len` writable bytes or be null.
 */
size_t hinf_last_error_message(char *buf, size_t len);

/**
 * Static description of a status code.
 */
const char *hinf_status_name(enum HinfStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HINFSF_H */
