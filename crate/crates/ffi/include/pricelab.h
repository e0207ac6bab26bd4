#ifndef PRICELAB_H
#define PRICELAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PricelabStatus {
  PRICELAB_STATUS_OK = 0,
  PRICELAB_STATUS_NULL_POINTER = 1,
  PRICELAB_STATUS_INVALID_INPUT = 2,
  PRICELAB_STATUS_CONFIG = 3,
  PRICELAB_STATUS_IO = 4,
  PRICELAB_STATUS_PANIC = 5,
} PricelabStatus;

/**
 * Parsed run configuration.
 */
typedef struct PricelabConfig PricelabConfig;

/**
 * Outcome of one training run.
 */
typedef struct PricelabRunResult PricelabRunResult;

/**
 * Scalar metrics of a run.
 */
typedef struct PricelabRunSummary {
  double total_reward;
  double final_reward;
  double greedy_eval_reward;
  double benchmark_mean;
  /**
   * 0 when the run never converged.
   */
  uint64_t convergence_iteration;
  bool converged;
  uint64_t flushes;
  size_t curve_len;
} PricelabRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *pricelab_last_error(void);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum PricelabStatus pricelab_config_default(struct PricelabConfig **out);

/**
 * Parse a TOML run configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum PricelabStatus pricelab_config_from_toml(const char *toml, struct PricelabConfig **out);

/**
 * # Safety
 * `cfg` must be a live handle from this library.
 */
enum PricelabStatus pricelab_config_set_seed(struct PricelabConfig *cfg, uint64_t seed);

/**
 * Canonical TOML of the configuration; free with [`pricelab_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum PricelabStatus pricelab_config_to_toml(const struct PricelabConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be NULL or a handle not yet freed.
 */
void pricelab_config_free(struct PricelabConfig *cfg);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void pricelab_string_free(char *s);

/**
 * Execute one training run.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum PricelabStatus pricelab_run(const struct PricelabConfig *cfg, struct PricelabRunResult **out);

/**
 * # Safety
 * `res` must be a live handle; `out` must be writable.
 */
enum PricelabStatus pricelab_result_summary(const struct PricelabRunResult *res,
                                            struct PricelabRunSummary *out);

/**
 * Copy up to `cap` learning-curve points; `written` receives the count.
 *
 * # Safety
 * `iterations` and `values` must each hold `cap` elements; `written` must be writable.
 */
enum PricelabStatus pricelab_result_curve(const struct PricelabRunResult *res,
                                          uint64_t *iterations,
                                          double *values,
                                          size_t cap,
                                          size_t *written);

/**
 * # Safety
 * `res` must be NULL or a handle not yet freed.
 */
void pricelab_result_free(struct PricelabRunResult *res);

/**
 * `beta * (1 - exp(steepness * discount))`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PricelabStatus pricelab_purchase_probability(double beta,
                                                  double discount,
                                                  double steepness,
                                                  double *out);

/**
 * Expected revenue of offering `discount` to a customer with consideration `beta`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PricelabStatus pricelab_expected_reward(double beta,
                                             double discount,
                                             double base_price,
                                             double steepness,
                                             double *out);

/**
 * Revenue-maximising discount on the continuum.
 *
 * # Safety
 * `out` must be writable.
 */
enum PricelabStatus pricelab_optimal_discount(double steepness, double *out);

/**
 * Closed-form perfect-knowledge benchmark (mean over states) for a config.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum PricelabStatus pricelab_benchmark_mean(const struct PricelabConfig *cfg, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRICELAB_H */
