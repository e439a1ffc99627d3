#ifndef KNOWSEARCH_H
#define KNOWSEARCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum KsStatus {
  KS_STATUS_OK = 0,
  KS_STATUS_NULL_POINTER = 1,
  KS_STATUS_INVALID_UTF8 = 2,
  KS_STATUS_PARSE = 3,
  KS_STATUS_INVALID_ARGUMENT = 4,
  KS_STATUS_IO = 5,
  KS_STATUS_INTERNAL = 6,
} KsStatus;

typedef enum KsRewardBranch {
  KS_REWARD_BRANCH_ZERO_INVALID = 0,
  KS_REWARD_BRANCH_DIRECT_ANSWER = 1,
  KS_REWARD_BRANCH_SEARCH_ANSWER = 2,
  KS_REWARD_BRANCH_ZERO_NO_BRANCH = 3,
} KsRewardBranch;

/**
 * Opaque policy weights.
 */
typedef struct KsPolicy KsPolicy;

/**
 * Opaque simulated world.
 */
typedef struct KsWorld KsWorld;

/**
 * Reward with its structure flags. `f1_a1` / `f1_a2` are only meaningful
 * when the matching `has_` field is true.
 */
typedef struct KsRewardBreakdown {
  double reward;
  bool f;
  bool s;
  bool t;
  bool u;
  bool has_f1_a1;
  double f1_a1;
  bool has_f1_a2;
  double f1_a2;
  enum KsRewardBranch branch;
} KsRewardBreakdown;

typedef struct KsMetrics {
  double em;
  double mean_f1;
  double sr;
  double sr_known;
  double sr_unknown;
  size_t n;
} KsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * success. Valid until the next call into the library on the same thread.
 */
const char *ks_last_error_message(void);

/**
 * Static, NUL-terminated version string.
 */
const char *ks_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void ks_string_free(char *s);

/**
 * # Safety
 * `pred` and `gold` must be NUL-terminated strings; `out` must be writable.
 */
enum KsStatus ks_token_f1(const char *pred, const char *gold, double *out);

/**
 * Parses a tagged trajectory and scores it against `n_golds` gold answers.
 *
 * # Safety
 * `text` must be a NUL-terminated string, `golds` an array of `n_golds`
 * NUL-terminated strings, and `out` writable.
 */
enum KsStatus ks_score_trajectory(const char *text,
                                  const char *const *golds,
                                  size_t n_golds,
                                  double tau,
                                  struct KsRewardBreakdown *out);

/**
 * Generates a world in memory.
 *
 * # Safety
 * `out` must be writable. On success `*out` owns a handle to release with
 * [`ks_world_free`].
 */
enum KsStatus ks_world_generate(size_t n_known,
                                size_t n_unknown,
                                uint64_t seed,
                                double label_noise,
                                double fault_rate,
                                size_t top_k,
                                struct KsWorld **out);

/**
 * Loads a world directory written by `knowsearch gen-data`.
 *
 * # Safety
 * `dir` must be a NUL-terminated path and `out` writable.
 */
enum KsStatus ks_world_load(const char *dir, struct KsWorld **out);

/**
 * Number of questions, or 0 for a null handle.
 *
 * # Safety
 * `world` must be null or a live handle.
 */
size_t ks_world_len(const struct KsWorld *world);

/**
 * # Safety
 * `world` must be null or a handle not yet freed.
 */
void ks_world_free(struct KsWorld *world);

/**
 * Trains from zero weights. `config` is flat `key = value` text; null or
 * empty means defaults.
 *
 * # Safety
 * `world` must be a live handle, `config` null or NUL-terminated, `out`
 * writable.
 */
enum KsStatus ks_train(const struct KsWorld *world, const char *config, struct KsPolicy **out);

/**
 * Builds a policy from a weight vector.
 *
 * # Safety
 * `weights` must point to `len` doubles and `out` be writable.
 */
enum KsStatus ks_policy_new(const double *weights, size_t len, struct KsPolicy **out);

/**
 * Loads a `params.json` file written by `knowsearch train`.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum KsStatus ks_policy_load(const char *path, struct KsPolicy **out);

/**
 * Copies up to `len` weights into `buf` and stores the full count in
 * `needed`. Pass a null `buf` to query the size.
 *
 * # Safety
 * `policy` must be a live handle, `buf` null or writable for `len` doubles,
 * `needed` writable.
 */
enum KsStatus ks_policy_weights(const struct KsPolicy *policy,
                                double *buf,
                                size_t len,
                                size_t *needed);

/**
 * Serializes the policy in the `params.json` format. Release the result
 * with [`ks_string_free`].
 *
 * # Safety
 * `policy` must be a live handle and `out` writable.
 */
enum KsStatus ks_policy_to_json(const struct KsPolicy *policy, char **out);

/**
 * # Safety
 * `policy` must be null or a handle not yet freed.
 */
void ks_policy_free(struct KsPolicy *policy);

/**
 * Greedy evaluation of `policy` on every question of `world`.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum KsStatus ks_evaluate(const struct KsPolicy *policy,
                          const struct KsWorld *world,
                          struct KsMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KNOWSEARCH_H */
