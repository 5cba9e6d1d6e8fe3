#ifndef CSRL_H
#define CSRL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum CsrlStatus {
  CSRL_STATUS_OK = 0,
  CSRL_STATUS_NULL_POINTER = 1,
  CSRL_STATUS_INVALID_UTF8 = 2,
  CSRL_STATUS_INVALID_INPUT = 3,
  CSRL_STATUS_CONSTRUCTION = 4,
  CSRL_STATUS_VERIFICATION = 5,
  CSRL_STATUS_CONFIG = 6,
  CSRL_STATUS_LOAD = 7,
  CSRL_STATUS_INVARIANT = 8,
  CSRL_STATUS_IO = 9,
  CSRL_STATUS_JSON = 10,
  CSRL_STATUS_OUT_OF_RANGE = 11,
  CSRL_STATUS_BUFFER_TOO_SMALL = 12,
  CSRL_STATUS_PANIC = 13,
} CsrlStatus;

/**
 * Built experiment handle.
 */
typedef struct CsrlExperiment CsrlExperiment;

/**
 * Recommendation environment handle.
 */
typedef struct CsrlRecsysEnv CsrlRecsysEnv;

/**
 * Verified restriction set handle.
 */
typedef struct CsrlRestrictionSet CsrlRestrictionSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *csrl_last_error(void);

/**
 * Crate version as a static NUL-terminated string.
 */
const char *csrl_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed. NULL is ignored.
 */
void csrl_string_free(char *s);

/**
 * Environment from the seeded default parameters.
 *
 * # Safety
 * `out_env` must be a valid pointer to write the handle to.
 */
enum CsrlStatus csrl_recsys_env_new_default(uint64_t seed, struct CsrlRecsysEnv **out_env);

/**
 * Environment from a JSON parameter document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_env` a valid pointer.
 */
enum CsrlStatus csrl_recsys_env_from_json(const char *json, struct CsrlRecsysEnv **out_env);

/**
 * # Safety
 * `env` must come from a `csrl_recsys_env_*` constructor and not have been freed.
 */
void csrl_recsys_env_free(struct CsrlRecsysEnv *env);

/**
 * # Safety
 * `env` must be a live handle; the out pointers must be valid.
 */
enum CsrlStatus csrl_recsys_env_shape(const struct CsrlRecsysEnv *env,
                                      uintptr_t *out_states,
                                      uintptr_t *out_actions);

/**
 * Immediate reward and termination probability of (state, action).
 *
 * # Safety
 * `env` must be a live handle; the out pointers must be valid.
 */
enum CsrlStatus csrl_recsys_env_pair(const struct CsrlRecsysEnv *env,
                                     uintptr_t state,
                                     uintptr_t action,
                                     double *out_reward,
                                     double *out_termination);

/**
 * The 13-member variability set for `env`, verified.
 *
 * # Safety
 * `env` must be a live handle; `out_set` a valid pointer.
 */
enum CsrlStatus csrl_restriction_set_recsys_default(const struct CsrlRecsysEnv *env,
                                                    struct CsrlRestrictionSet **out_set);

/**
 * Builds and verifies a restriction-set document. `env` may be NULL when the
 * document has no variability entries.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `env` NULL or a live handle;
 * `out_set` a valid pointer.
 */
enum CsrlStatus csrl_restriction_set_from_json(const char *json,
                                               uintptr_t num_states,
                                               uintptr_t num_actions,
                                               const struct CsrlRecsysEnv *env,
                                               struct CsrlRestrictionSet **out_set);

/**
 * # Safety
 * `set` must come from a `csrl_restriction_set_*` constructor and not have been freed.
 */
void csrl_restriction_set_free(struct CsrlRestrictionSet *set);

/**
 * # Safety
 * `set` must be a live handle; `out_len` a valid pointer.
 */
enum CsrlStatus csrl_restriction_set_len(const struct CsrlRestrictionSet *set, uintptr_t *out_len);

/**
 * Id of member `k`; free the result with [`csrl_string_free`].
 *
 * # Safety
 * `set` must be a live handle; `out_id` a valid pointer.
 */
enum CsrlStatus csrl_restriction_set_id(const struct CsrlRestrictionSet *set,
                                        uintptr_t k,
                                        char **out_id);

/**
 * Whether member `k` allows `action` in `state`.
 *
 * # Safety
 * `set` must be a live handle; `out_allowed` a valid pointer.
 */
enum CsrlStatus csrl_restriction_set_allows(const struct CsrlRestrictionSet *set,
                                            uintptr_t k,
                                            uintptr_t state,
                                            uintptr_t action,
                                            bool *out_allowed);

/**
 * Whether member `j` is declared strictly less restricted than member `k`.
 *
 * # Safety
 * `set` must be a live handle; `out_looser` a valid pointer.
 */
enum CsrlStatus csrl_restriction_set_is_looser(const struct CsrlRestrictionSet *set,
                                               uintptr_t j,
                                               uintptr_t k,
                                               bool *out_looser);

/**
 * Experiment from a JSON config; relative paths resolve against the working directory.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_exp` a valid pointer.
 */
enum CsrlStatus csrl_experiment_from_json(const char *json, struct CsrlExperiment **out_exp);

/**
 * Experiment from a JSON config file; relative paths resolve against its directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_exp` a valid pointer.
 */
enum CsrlStatus csrl_experiment_load(const char *path, struct CsrlExperiment **out_exp);

/**
 * # Safety
 * `exp` must come from a `csrl_experiment_*` constructor and not have been freed.
 */
void csrl_experiment_free(struct CsrlExperiment *exp);

/**
 * Number of episodes per seed.
 *
 * # Safety
 * `exp` must be a live handle; `out_episodes` a valid pointer.
 */
enum CsrlStatus csrl_experiment_episodes(const struct CsrlExperiment *exp, uintptr_t *out_episodes);

/**
 * Runs one seed and writes each episode's raw return into `returns`, which
 * must hold at least `capacity` values. `out_len` receives the episode count
 * even when the buffer is too small.
 *
 * # Safety
 * `exp` must be a live handle; `returns` must point to `capacity` writable
 * doubles (it may be NULL when `capacity` is 0); `out_len` a valid pointer.
 */
enum CsrlStatus csrl_experiment_run_seed(const struct CsrlExperiment *exp,
                                         uint64_t seed,
                                         double *returns,
                                         uintptr_t capacity,
                                         uintptr_t *out_len);

/**
 * Runs every configured seed, writes `records.csv`, `summary.json` and
 * `config.json` under `out_dir`, and returns the summary as JSON (free with
 * [`csrl_string_free`]). Pass NULL for `out_summary` to skip it.
 *
 * # Safety
 * `exp` must be a live handle; `out_dir` a NUL-terminated string;
 * `out_summary` NULL or a valid pointer.
 */
enum CsrlStatus csrl_experiment_run(const struct CsrlExperiment *exp,
                                    const char *out_dir,
                                    char **out_summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSRL_H */
