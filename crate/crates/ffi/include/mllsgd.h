#ifndef MLLSGD_H
#define MLLSGD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MllsgdStatus {
  MLLSGD_STATUS_OK = 0,
  MLLSGD_STATUS_NULL_POINTER = 1,
  MLLSGD_STATUS_INVALID_UTF8 = 2,
  MLLSGD_STATUS_CONFIG = 3,
  MLLSGD_STATUS_NETWORK = 4,
  MLLSGD_STATUS_OBJECTIVE = 5,
  MLLSGD_STATUS_DIVERGENCE = 6,
  MLLSGD_STATUS_NUMERICAL = 7,
  MLLSGD_STATUS_IO = 8,
  MLLSGD_STATUS_OUT_OF_RANGE = 9,
  MLLSGD_STATUS_PANIC = 10,
} MllsgdStatus;

/**
 * A configured experiment.
 */
typedef struct MllsgdExperiment MllsgdExperiment;

/**
 * The evaluation records of one run.
 */
typedef struct MllsgdTrace MllsgdTrace;

/**
 * One evaluation record. `test_acc` is NaN when no test set is configured.
 */
typedef struct MllsgdRecord {
  uint64_t k;
  uint64_t time_slot;
  double loss_full;
  double grad_norm_sq;
  double consensus_err;
  double test_acc;
  /**
   * Gradient steps taken by all workers so far.
   */
  uint64_t total_grad_steps;
} MllsgdRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a JSON config and builds an experiment. Relative dataset paths
 * resolve against `base_dir`, which may be null for the working directory.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string, `base_dir` null or a
 * NUL-terminated string, and `out` a valid pointer.
 */
enum MllsgdStatus mllsgd_experiment_new(const char *config_json,
                                        const char *base_dir,
                                        struct MllsgdExperiment **out);

/**
 * # Safety
 * `exp` must be null or a handle from [`mllsgd_experiment_new`] not yet freed.
 */
void mllsgd_experiment_free(struct MllsgdExperiment *exp);

/**
 * Number of workers in the network.
 *
 * # Safety
 * `exp` must be a live handle and `out` a valid pointer.
 */
enum MllsgdStatus mllsgd_experiment_num_workers(const struct MllsgdExperiment *exp, uint64_t *out);

/**
 * Spectral quantity of the hub matrix in use.
 *
 * # Safety
 * `exp` must be a live handle and `out` a valid pointer.
 */
enum MllsgdStatus mllsgd_experiment_zeta(const struct MllsgdExperiment *exp, double *out);

/**
 * Runs the experiment with `seed` replacing the configured seed.
 *
 * # Safety
 * `exp` must be a live handle and `out` a valid pointer.
 */
enum MllsgdStatus mllsgd_experiment_run(const struct MllsgdExperiment *exp,
                                        uint64_t seed,
                                        struct MllsgdTrace **out);

/**
 * # Safety
 * `trace` must be null or a handle from [`mllsgd_experiment_run`] not yet freed.
 */
void mllsgd_trace_free(struct MllsgdTrace *trace);

/**
 * Number of records in a trace; 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
uint64_t mllsgd_trace_len(const struct MllsgdTrace *trace);

/**
 * Copies record `index` into `out`.
 *
 * # Safety
 * `trace` must be a live handle and `out` a valid pointer.
 */
enum MllsgdStatus mllsgd_trace_get(const struct MllsgdTrace *trace,
                                   uint64_t index,
                                   struct MllsgdRecord *out);

/**
 * Both forms of the mixing constant for a given `zeta`.
 *
 * # Safety
 * `tight` and `conservative` must be valid pointers.
 */
enum MllsgdStatus mllsgd_gamma(double zeta, double *tight, double *conservative);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to at least `len` writable bytes.
 */
size_t mllsgd_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mllsgd_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MLLSGD_H */
