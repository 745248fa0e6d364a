#ifndef RADIS_H
#define RADIS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a fallible call.
typedef enum RadisStatus {
  RADIS_STATUS_OK = 0,
  RADIS_STATUS_NULL_POINTER = 1,
  RADIS_STATUS_INVALID_ARGUMENT = 2,
  RADIS_STATUS_INVALID_CONFIG = 3,
  RADIS_STATUS_DIMENSION_MISMATCH = 4,
  RADIS_STATUS_DEGENERATE_WEIGHTS = 5,
  RADIS_STATUS_NUMERICAL = 6,
  RADIS_STATUS_IO = 7,
  RADIS_STATUS_PANIC = 8,
} RadisStatus;

// Output of one run: weighted particles, evidence and the final emulator.
typedef struct RadisRun RadisRun;

// Sampler settings.
typedef struct RadisSamplerConfig RadisSamplerConfig;

// An unnormalized target with its own evaluation counter.
typedef struct RadisTarget RadisTarget;

// Unnormalized log density supplied by the caller. Called from several
// threads at once, so it must be thread-safe. Returns `-inf` for zero.
typedef double (*RadisLogDensityFn)(void *user_data, const double *x, size_t dim);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *radis_version(void);

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *radis_last_error(void);

// Target from a caller-supplied log density. `lower` and `upper` give a
// bounded domain of `dim` entries each; pass both null for an unbounded one.
//
// # Safety
// `lower` and `upper` must be null or point to `dim` doubles. `callback`
// and `user_data` must stay valid and thread-safe for the handle's lifetime.
enum RadisStatus radis_target_from_callback(size_t dim,
                                            const double *lower,
                                            const double *upper,
                                            RadisLogDensityFn callback,
                                            void *user_data,
                                            struct RadisTarget **out);

// Built-in two-dimensional banana target on `[-10, 10]^2`.
//
// # Safety
// `out` must be a valid pointer.
enum RadisStatus radis_target_banana(struct RadisTarget **out);

// Built-in three-component Gaussian mixture with evidence 1.
//
// # Safety
// `out` must be a valid pointer.
enum RadisStatus radis_target_mixture(size_t dim, struct RadisTarget **out);

// Dimension of a target, or 0 for a null handle.
//
// # Safety
// `target` must be null or a live handle.
size_t radis_target_dim(const struct RadisTarget *target);

// Target evaluations made so far through this handle.
//
// # Safety
// `target` must be null or a live handle.
uint64_t radis_target_evaluations(const struct RadisTarget *target);

// `log pi(x)` without touching the evaluation counter.
//
// # Safety
// `x` must point to `len` doubles; `target` and `out` must be valid.
enum RadisStatus radis_target_log_density(const struct RadisTarget *target,
                                          const double *x,
                                          size_t len,
                                          double *out);

// # Safety
// `target` must be null or a handle not yet freed.
void radis_target_free(struct RadisTarget *target);

// Nearest-neighbour sampler: `iterations` rounds of `samples` draws, inner
// pool of `batch` draws, `initial` uniform starting nodes.
//
// # Safety
// `out` must be a valid pointer.
enum RadisStatus radis_config_nn(size_t iterations,
                                 size_t samples,
                                 size_t batch,
                                 size_t initial,
                                 struct RadisSamplerConfig **out);

// Sampler settings from a TOML document with the same keys as a `radis`
// algorithm entry's `params` table.
//
// # Safety
// `toml_text` must be a NUL-terminated string; `out` must be valid.
enum RadisStatus radis_config_from_toml(const char *toml_text, struct RadisSamplerConfig **out);

// Target evaluations a run with this config spends on a `dim`-dimensional target.
//
// # Safety
// `config` must be null or a live handle.
size_t radis_config_budget(const struct RadisSamplerConfig *config, size_t dim);

// # Safety
// `config` must be null or a handle not yet freed.
void radis_config_free(struct RadisSamplerConfig *config);

// Run the sampler. The same seed, config and target give the same output.
//
// # Safety
// All pointers must be valid handles or out-pointers.
enum RadisStatus radis_run(const struct RadisTarget *target,
                           const struct RadisSamplerConfig *config,
                           uint64_t seed,
                           struct RadisRun **out);

// Evidence estimate `Z`, or NaN for a null handle.
//
// # Safety
// `run` must be null or a live handle.
double radis_run_evidence(const struct RadisRun *run);

// Number of weighted particles.
//
// # Safety
// `run` must be null or a live handle.
size_t radis_run_len(const struct RadisRun *run);

// Particle dimension.
//
// # Safety
// `run` must be null or a live handle.
size_t radis_run_dim(const struct RadisRun *run);

// Target evaluations spent by the run.
//
// # Safety
// `run` must be null or a live handle.
uint64_t radis_run_evaluations(const struct RadisRun *run);

// Size of the final node set.
//
// # Safety
// `run` must be null or a live handle.
size_t radis_run_node_count(const struct RadisRun *run);

// Effective sample size of the normalized weights.
//
// # Safety
// `run` and `out` must be valid.
enum RadisStatus radis_run_ess(const struct RadisRun *run, double *out);

// Self-normalized posterior mean into `out` (`len` must equal the dimension).
//
// # Safety
// `out` must point to `len` writable doubles.
enum RadisStatus radis_run_mean(const struct RadisRun *run, double *out, size_t len);

// Copy the particles: `points` receives `len * dim` coordinates row by row,
// `log_weights` receives `len` unnormalized log weights. `len` must equal
// [`radis_run_len`]. Either output may be null to skip it.
//
// # Safety
// Non-null outputs must have room for the stated number of doubles.
enum RadisStatus radis_run_particles(const struct RadisRun *run,
                                     double *points,
                                     double *log_weights,
                                     size_t len);

// `log pi_hat(x)` of the emulator built on the final node set.
//
// # Safety
// `x` must point to `len` doubles; `run` and `out` must be valid.
enum RadisStatus radis_run_emulator_log(const struct RadisRun *run,
                                        const double *x,
                                        size_t len,
                                        double *out);

// # Safety
// `run` must be null or a handle not yet freed.
void radis_run_free(struct RadisRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RADIS_H */
