/* C interface to the stepgap evidence-gap checker. */

#ifndef STEPGAP_H
#define STEPGAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible `sg_*` call.
 */
typedef enum SgStatus {
  /**
   * The call succeeded.
   */
  SG_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SG_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SG_STATUS_INVALID_UTF8 = 2,
  /**
   * A JSON payload, trace, or replay script failed to parse or validate.
   */
  SG_STATUS_MALFORMED_INPUT = 3,
  /**
   * A configuration value is out of range or inconsistent.
   */
  SG_STATUS_CONFIG_ERROR = 4,
  /**
   * A judge backend is unreachable, failed calibration, or has no script
   * entry for a request.
   */
  SG_STATUS_JUDGE_UNAVAILABLE = 5,
  /**
   * An internal invariant failed; the process state is still sound.
   */
  SG_STATUS_INTERNAL_ERROR = 6,
} SgStatus;

/**
 * Opaque handle pairing a checker variant with its judge backends.
 */
typedef struct SgChecker SgChecker;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string; never freed.
 */
const char *sg_version(void);

/**
 * Message for the most recent failure on the calling thread, or null if no
 * `sg_*` call has failed yet. The pointer stays valid until the next failing
 * call on this thread; do not free it.
 */
const char *sg_last_error_message(void);

/**
 * Release a string returned through a `char **` out-parameter.
 *
 * # Safety
 * `s` must be null or a pointer previously returned by this library through
 * an out-parameter, not yet freed. Passing any other pointer is undefined
 * behavior.
 */
void sg_string_free(char *s);

/**
 * Bag-of-words token F1 between two answer strings, written to `out`.
 *
 * # Safety
 * `a` and `b` must be NUL-terminated strings and `out` a valid writable
 * double, all valid for the duration of the call.
 */
enum SgStatus sg_token_f1(const char *a, const char *b, double *out);

/**
 * The flag-everything question-level F1 identity, element-wise over `w`:
 * `qf1[i] = 2*w[i] / (1 + w[i])`. Each `w[i]` must lie in (0, 1].
 *
 * # Safety
 * `w` and `out` must point to arrays of at least `len` doubles, valid for
 * the duration of the call.
 */
enum SgStatus sg_qf1_trap_curve(const double *w, size_t len, double *out);

/**
 * Build a checker over scripted replay judges.
 *
 * `variant` is a checker variant name (`stepgap`, `llm-strict`, `llm-only`,
 * `single-llm-xl`, `nli-only`, `flag-everything`). The two paths name JSONL
 * replay scripts; the NLI script must include the label-calibration probe
 * entries or construction fails with `SG_STATUS_JUDGE_UNAVAILABLE`.
 *
 * # Safety
 * All three strings must be NUL-terminated and `out` a valid writable slot,
 * all valid for the duration of the call. On success the caller owns the
 * handle and must release it with `sg_checker_free`.
 */
enum SgStatus sg_checker_new_scripted(const char *variant,
                                      const char *llm_script_path,
                                      const char *nli_script_path,
                                      struct SgChecker **out);

/**
 * Build a checker over the HTTP judge backends.
 *
 * `judge_config_json` configures endpoints, model names, timeouts, and
 * thresholds; null means the built-in defaults. Construction performs the
 * NLI label-calibration probes, so the NLI endpoint must be reachable.
 *
 * # Safety
 * `variant` and (when non-null) `judge_config_json` must be NUL-terminated
 * strings and `out` a valid writable slot, all valid for the duration of the
 * call. On success the caller owns the handle and must release it with
 * `sg_checker_free`.
 */
enum SgStatus sg_checker_new_http(const char *variant,
                                  const char *judge_config_json,
                                  struct SgChecker **out);

/**
 * Release a checker handle.
 *
 * # Safety
 * `checker` must be null or a handle from `sg_checker_new_*`, not yet freed.
 */
void sg_checker_free(struct SgChecker *checker);

/**
 * Check every step of one trace record.
 *
 * `trace_record_json` is a single benchmark record (the schema of one
 * `benchmark.jsonl` line). On success `out_verdicts_json` receives a JSON
 * array with one gap verdict per step, in step order.
 *
 * # Safety
 * `checker` must be a live handle from `sg_checker_new_*`;
 * `trace_record_json` must be a NUL-terminated string; `out_verdicts_json`
 * must be a valid writable slot. The returned string must be released with
 * `sg_string_free`.
 */
enum SgStatus sg_checker_check_trace(const struct SgChecker *checker,
                                     const char *trace_record_json,
                                     char **out_verdicts_json);

/**
 * Compute the typed process reward for one trajectory.
 *
 * `verdicts_json` is the array produced by `sg_checker_check_trace` for the
 * same trace; `reward_config_json` configures the reward table and shaping
 * terms, null meaning the built-in defaults. On success
 * `out_breakdown_json` receives the full reward breakdown record.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out_breakdown_json` must be a
 * valid writable slot. The returned string must be released with
 * `sg_string_free`.
 */
enum SgStatus sg_trajectory_return(const char *verdicts_json,
                                   const char *trace_record_json,
                                   const char *reward_config_json,
                                   char **out_breakdown_json);

/**
 * Compute the full metrics report from step predictions.
 *
 * `predictions_json` is a JSON array of step-prediction records
 * (`question_id`, `step_index`, `predicted`, optional `gold`, `unchecked`);
 * `correctness_json` maps question ids to `true`/`false`/`null` answer
 * outcomes; `report_config_json` configures bootstrap resampling, null
 * meaning the built-in defaults.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out_report_json` must be a valid
 * writable slot. The returned string must be released with `sg_string_free`.
 */
enum SgStatus sg_metrics_report(const char *predictions_json,
                                const char *correctness_json,
                                const char *report_config_json,
                                char **out_report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEPGAP_H */
