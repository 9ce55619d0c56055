#ifndef QMEM_H
#define QMEM_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QmemAxis {
  QMEM_AXIS_X = 0,
  QMEM_AXIS_Y = 1,
  QMEM_AXIS_Z = 2,
} QmemAxis;

/**
 * Status returned by every fallible call.
 */
typedef enum QmemStatus {
  QMEM_STATUS_OK = 0,
  QMEM_STATUS_NULL_POINTER = 1,
  QMEM_STATUS_INVALID_ARGUMENT = 2,
  QMEM_STATUS_CONFIG = 3,
  QMEM_STATUS_CHAIN_TOO_LONG = 4,
  QMEM_STATUS_NUMERICAL_FAILURE = 5,
  QMEM_STATUS_FIT_REFUSED = 6,
  QMEM_STATUS_IO = 7,
  QMEM_STATUS_BUFFER_TOO_SMALL = 8,
  QMEM_STATUS_PANIC = 9,
} QmemStatus;

/**
 * Recurrence coefficients of the chain mapping.
 */
typedef struct QmemChain QmemChain;

/**
 * Run configuration; starts from the defaults and takes `key=value` edits.
 */
typedef struct QmemConfig QmemConfig;

/**
 * Result of one solver run: channel series and derived measures.
 */
typedef struct QmemRun QmemRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qmem_version(void);

/**
 * Optimal recovery fidelity of the rotating-wave channel with `|Gamma| = abs_gamma`.
 */
double qmem_fopt_of_gamma(double abs_gamma);

/**
 * Creates a configuration holding the defaults.
 *
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum QmemStatus qmem_config_new(struct QmemConfig **out);

/**
 * Parses a TOML configuration. List-valued keys are accepted here but a
 * solver call rejects a configuration that expands to more than one point.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QmemStatus qmem_config_from_toml(const char *text, struct QmemConfig **out);

/**
 * Sets `key` (as `section.name`) to `value`, parsed as a TOML literal.
 *
 * # Safety
 * `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum QmemStatus qmem_config_set(struct QmemConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must be null or a handle from this library, released only once.
 */
void qmem_config_free(struct QmemConfig *cfg);

/**
 * Solves the rotating-wave model.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum QmemStatus qmem_rwa_solve(const struct QmemConfig *cfg, struct QmemRun **out);

/**
 * Runs the full model with matrix product states.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum QmemStatus qmem_full_evolve(const struct QmemConfig *cfg, struct QmemRun **out);

/**
 * Runs the full model by exact state-vector propagation (small chains).
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum QmemStatus qmem_oracle_exact(const struct QmemConfig *cfg, struct QmemRun **out);

/**
 * Number of time samples, or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t qmem_run_len(const struct QmemRun *run);

/**
 * Spacing of the time samples, or NaN for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
double qmem_run_dt(const struct QmemRun *run);

/**
 * Writes `D(t)` along `axis` into `out[0..qmem_run_len]`.
 *
 * # Safety
 * `run` must be a live handle and `out` valid for `len` doubles.
 */
enum QmemStatus qmem_run_distinguishability(const struct QmemRun *run,
                                            enum QmemAxis axis,
                                            double *out,
                                            size_t len);

/**
 * Writes the optimal recovery fidelity into `out[0..qmem_run_len]`.
 *
 * # Safety
 * `run` must be a live handle and `out` valid for `len` doubles.
 */
enum QmemStatus qmem_run_optimal_fidelity(const struct QmemRun *run, double *out, size_t len);

/**
 * Writes the non-Markovianity `N(t)` of the direction scan.
 *
 * # Safety
 * `run` must be a live handle and `out` valid for `len` doubles.
 */
enum QmemStatus qmem_run_nm(const struct QmemRun *run, double *out, size_t len);

/**
 * Writes the excited-state amplitude of a rotating-wave run.
 *
 * # Safety
 * `run` must be a live handle; `re` and `im` valid for `len` doubles.
 */
enum QmemStatus qmem_run_gamma(const struct QmemRun *run, double *re, double *im, size_t len);

/**
 * Number of audited samples violating a gain/loss inequality.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum QmemStatus qmem_run_audit_violations(const struct QmemRun *run, size_t *out);

/**
 * Exponential decay rate of `D` along `axis`; `QMEM_STATUS_FIT_REFUSED`
 * for traces that do not decay.
 *
 * # Safety
 * `run` must be a live handle and `rate` a valid pointer.
 */
enum QmemStatus qmem_run_fit_rate(const struct QmemRun *run, enum QmemAxis axis, double *rate);

/**
 * # Safety
 * `run` must be null or a handle from this library, released only once.
 */
void qmem_run_free(struct QmemRun *run);

/**
 * Maps the configured bath onto a chain of `chain.length` sites.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum QmemStatus qmem_chain_map(const struct QmemConfig *cfg, struct QmemChain **out);

/**
 * Number of chain sites, or 0 for a null handle.
 *
 * # Safety
 * `chain` must be null or a live handle.
 */
size_t qmem_chain_len(const struct QmemChain *chain);

/**
 * Writes on-site energies and squared couplings; `hopping_sq[0]` is the
 * total bath weight and `hopping_sq[n]` couples sites `n-1` and `n`.
 *
 * # Safety
 * `chain` must be a live handle; both buffers valid for `len` doubles.
 */
enum QmemStatus qmem_chain_coefficients(const struct QmemChain *chain,
                                        double *onsite,
                                        double *hopping_sq,
                                        size_t len);

/**
 * # Safety
 * `chain` must be null or a handle from this library, released only once.
 */
void qmem_chain_free(struct QmemChain *chain);

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library from this thread.
 */
const char *qmem_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QMEM_H */
