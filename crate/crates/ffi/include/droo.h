#ifndef DROO_H
#define DROO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DrooKMode {
  DROO_K_MODE_FIXED = 0,
  DROO_K_MODE_ADAPTIVE = 1,
} DrooKMode;

typedef enum DrooQuantizer {
  DROO_QUANTIZER_ORDER_PRESERVING = 0,
  DROO_QUANTIZER_KNN = 1,
} DrooQuantizer;

typedef enum DrooStatus {
  DROO_STATUS_OK = 0,
  DROO_STATUS_NULL_POINTER = 1,
  DROO_STATUS_INVALID_ARGUMENT = 2,
  DROO_STATUS_LENGTH_MISMATCH = 3,
  DROO_STATUS_NON_CONVERGENCE = 4,
  DROO_STATUS_TOO_LARGE = 5,
  DROO_STATUS_IO = 6,
  DROO_STATUS_PANIC = 7,
} DrooStatus;

/**
 * Opaque online agent.
 */
typedef struct DrooAgent DrooAgent;

/**
 * Opaque system parameters.
 */
typedef struct DrooParams DrooParams;

/**
 * Agent settings not covered by the system parameters. Training uses the
 * reference hyperparameters.
 */
typedef struct DrooAgentOptions {
  enum DrooQuantizer quantizer;
  enum DrooKMode k_mode;
  /**
   * Candidate count in fixed mode.
   */
  size_t k;
  /**
   * Update interval in adaptive mode.
   */
  uint64_t delta;
  /**
   * Candidate-evaluation threads; 1 evaluates in place.
   */
  size_t threads;
} DrooAgentOptions;

typedef struct DrooFrameOutput {
  double a;
  double q;
  size_t k_star;
  size_t k_used;
  /**
   * 1 when the policy was trained this frame; `loss` is valid only then.
   */
  uint8_t trained;
  double loss;
} DrooFrameOutput;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Reference constants for `n` devices; null when `n` is 0.
 */
struct DrooParams *droo_params_new(size_t n);

/**
 * # Safety
 * `params` is null or a handle from [`droo_params_new`] not yet freed.
 */
void droo_params_free(struct DrooParams *params);

/**
 * # Safety
 * `params` is a live handle or null.
 */
size_t droo_params_n(const struct DrooParams *params);

/**
 * Replaces the per-device weights.
 *
 * # Safety
 * `params` is a live handle; `weights` holds `len` doubles.
 */
enum DrooStatus droo_params_set_weights(struct DrooParams *params,
                                        const double *weights,
                                        size_t len);

/**
 * Optimal allocation for action `x` (0/1 bytes) under gains `h`.
 * `tau_out` receives `n` doubles.
 *
 * # Safety
 * `params` is a live handle; `h`, `x` and `tau_out` hold `n` elements;
 * `a_out` and `q_out` are writable.
 */
enum DrooStatus droo_solve_p2(const struct DrooParams *params,
                              const double *h,
                              const uint8_t *x,
                              size_t n,
                              double *a_out,
                              double *tau_out,
                              double *q_out);

/**
 * Best action over all `2^n` (n <= 12).
 *
 * # Safety
 * `params` is a live handle; `h` and `x_out` hold `n` elements; `q_out` is
 * writable.
 */
enum DrooStatus droo_exhaustive(const struct DrooParams *params,
                                const double *h,
                                size_t n,
                                uint8_t *x_out,
                                double *q_out);

/**
 * Coordinate descent from all-local.
 *
 * # Safety
 * As for [`droo_exhaustive`].
 */
enum DrooStatus droo_coordinate_descent(const struct DrooParams *params,
                                        const double *h,
                                        size_t n,
                                        uint8_t *x_out,
                                        double *q_out);

/**
 * Writes `k` candidate actions, row-major `k x n`, into `out`.
 *
 * # Safety
 * `xhat` holds `n` doubles in (0, 1); `out` holds `k * n` bytes.
 */
enum DrooStatus droo_quantize(enum DrooQuantizer kind,
                              const double *xhat,
                              size_t n,
                              size_t k,
                              uint8_t *out);

/**
 * Creates an agent with a freshly initialized policy; `*out` receives
 * the handle.
 *
 * # Safety
 * `params` is a live handle; `options` and `out` are valid pointers.
 */
enum DrooStatus droo_agent_new(const struct DrooParams *params,
                               const struct DrooAgentOptions *options,
                               uint64_t seed,
                               struct DrooAgent **out);

/**
 * # Safety
 * `agent` is null or a handle from [`droo_agent_new`] not yet freed.
 */
void droo_agent_free(struct DrooAgent *agent);

/**
 * Processes frame `t` (1-based) with gains `h`. The chosen action goes to
 * `x_out` and its time split to `tau_out`; either may be null.
 *
 * # Safety
 * `agent` is a live handle; `h` holds `n` doubles; non-null `x_out` and
 * `tau_out` hold `n` elements; `out` is writable.
 */
enum DrooStatus droo_agent_step(struct DrooAgent *agent,
                                uint64_t t,
                                const double *h,
                                size_t n,
                                struct DrooFrameOutput *out,
                                uint8_t *x_out,
                                double *tau_out);

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *droo_last_error_message(void);

/**
 * NUL-terminated crate version.
 */
const char *droo_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DROO_H */
