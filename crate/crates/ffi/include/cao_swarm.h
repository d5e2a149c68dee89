#ifndef CAO_SWARM_H
#define CAO_SWARM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every exported call.
 */
typedef enum CaoStatus {
  CAO_STATUS_OK = 0,
  CAO_STATUS_NULL_POINTER = 1,
  CAO_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed configuration or arguments.
   */
  CAO_STATUS_CONFIG = 3,
  /**
   * The algorithm broke one of its own guarantees (constraint violation,
   * protocol misuse, non-finite value).
   */
  CAO_STATUS_INVARIANT_BREACH = 4,
  /**
   * The caller's buffer is shorter than the data; the required length is
   * still reported.
   */
  CAO_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * A query needs a finished run.
   */
  CAO_STATUS_NOT_EXECUTED = 6,
  CAO_STATUS_OUT_OF_RANGE = 7,
  CAO_STATUS_IO = 8,
  CAO_STATUS_PANIC = 9,
} CaoStatus;

/**
 * One robot's optimizer.
 */
typedef struct CaoAgent CaoAgent;

/**
 * A scenario and, once executed, its results.
 */
typedef struct CaoRun CaoRun;

/**
 * Host predicate for candidate decisions: return true if the robot may move
 * to `x` (of length `dim`).
 */
typedef bool (*CaoAdmitFn)(const double *x, size_t dim, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, without the
 * terminating NUL.
 */
size_t cao_last_error_length(void);

/**
 * Copies the last error message (NUL-terminated, truncated to fit) into
 * `buf` and returns the number of bytes written without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t cao_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cao_version(void);

/**
 * Creates an agent at `x0` (length `dim`). `config_toml` holds the agent
 * settings (`window`, `perturbations`, `regressor`, `step`, ...); null
 * selects the defaults.
 *
 * # Safety
 * `x0` must point to `dim` readable doubles, `config_toml` must be null or a
 * NUL-terminated string, and `out` must be writable.
 */
enum CaoStatus cao_agent_new(size_t id,
                             const double *x0,
                             size_t dim,
                             const char *config_toml,
                             uint64_t seed,
                             struct CaoAgent **out);

/**
 * Releases an agent. Null is a no-op.
 *
 * # Safety
 * `agent` must come from [`cao_agent_new`] and not be used afterwards.
 */
void cao_agent_free(struct CaoAgent *agent);

/**
 * Anchors the agent's subcost at the current global cost. Call once before
 * the first iteration and again after reactivation.
 *
 * # Safety
 * `agent` must be a live handle.
 */
enum CaoStatus cao_agent_join(struct CaoAgent *agent, double global_cost);

/**
 * Marks the agent active or inactive; an inactive agent keeps its decision.
 *
 * # Safety
 * `agent` must be a live handle.
 */
enum CaoStatus cao_agent_set_active(struct CaoAgent *agent, bool active);

/**
 * One decision step at iteration `k` given this robot's discrepancy. The
 * next decision is written to `next` (capacity `len`). A null `admit`
 * accepts every candidate.
 *
 * # Safety
 * `agent` must be a live handle, `next` must hold `len` doubles, and
 * `admit` (if set) must be safe to call with `user_data`.
 */
enum CaoStatus cao_agent_iterate(struct CaoAgent *agent,
                                 double delta,
                                 size_t k,
                                 CaoAdmitFn admit,
                                 void *user_data,
                                 double *next,
                                 size_t len);

/**
 * Copies the current decision into `buf`.
 *
 * # Safety
 * `agent` must be a live handle, `buf` must hold `len` doubles and
 * `written` must be null or writable.
 */
enum CaoStatus cao_agent_decision(const struct CaoAgent *agent,
                                  double *buf,
                                  size_t len,
                                  size_t *written);

/**
 * Parses and validates a scenario document.
 *
 * # Safety
 * `scenario_toml` must be a NUL-terminated string and `out` writable.
 */
enum CaoStatus cao_run_new(const char *scenario_toml, struct CaoRun **out);

/**
 * Releases a run. Null is a no-op.
 *
 * # Safety
 * `run` must come from [`cao_run_new`] and not be used afterwards.
 */
void cao_run_free(struct CaoRun *run);

/**
 * Replaces the scenario seed; discards earlier results.
 *
 * # Safety
 * `run` must be a live handle.
 */
enum CaoStatus cao_run_set_seed(struct CaoRun *run, uint64_t seed);

/**
 * Executes the scenario to completion.
 *
 * # Safety
 * `run` must be a live handle.
 */
enum CaoStatus cao_run_execute(struct CaoRun *run);

/**
 * Number of recorded iterations.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum CaoStatus cao_run_iterations(const struct CaoRun *run, size_t *out);

/**
 * Global cost measured at iteration `k`.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum CaoStatus cao_run_cost(const struct CaoRun *run, size_t k, double *out);

/**
 * Final decision of robot `robot` after the last iteration.
 *
 * # Safety
 * `run` must be a live handle, `buf` must hold `len` doubles and `written`
 * must be null or writable.
 */
enum CaoStatus cao_run_final_position(const struct CaoRun *run,
                                      size_t robot,
                                      double *buf,
                                      size_t len,
                                      size_t *written);

/**
 * Writes the run's artifact files (metrics, trajectory, summary, ...) into
 * `dir`, creating it if needed.
 *
 * # Safety
 * `run` must be a live handle and `dir` a NUL-terminated string.
 */
enum CaoStatus cao_run_write_artifacts(const struct CaoRun *run, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAO_SWARM_H */
