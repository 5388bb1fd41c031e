#ifndef UBA_CHECK_H
#define UBA_CHECK_H

/* Generated by cbindgen from uba-check-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status of an FFI call.
 */
typedef enum {
  /**
   * Success.
   */
  UBA_OK = 0,
  /**
   * A required pointer was null or an argument was invalid.
   */
  UBA_ERR_INVALID_ARGUMENT = 1,
  /**
   * The automaton admits two accepting runs over some word.
   */
  UBA_ERR_AMBIGUOUS = 2,
  /**
   * Input text could not be parsed.
   */
  UBA_ERR_PARSE = 3,
  /**
   * Numerical procedure or precondition failure.
   */
  UBA_ERR_NUMERIC = 4,
} uba_status;

/**
 * Opaque Büchi automaton handle.
 */
typedef struct uba_automaton uba_automaton;

/**
 * Opaque Markov chain handle.
 */
typedef struct uba_dtmc uba_dtmc;

/**
 * Engine configuration; obtain defaults from [`uba_options_default`].
 */
typedef struct {
  /**
   * 0 = power iteration, 1 = rank-based.
   */
  int32_t method;
  /**
   * Convergence threshold (default 1e-10).
   */
  double epsilon;
  /**
   * Iteration budget before the rank fallback (default 1000000).
   */
  uint64_t max_iter;
  /**
   * Pivot tolerance of rank computations (default 1e-9).
   */
  double rank_tol;
  /**
   * Nonzero skips the ambiguity check.
   */
  int32_t trust_unambiguous;
  /**
   * Worker threads for independent SCCs (default 1).
   */
  uint32_t workers;
} uba_options;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version string; static, do not free.
 */
const char *uba_version(void);

/**
 * Default engine options.
 */
uba_options uba_options_default(void);

/**
 * Message of the most recent error on this thread, or null. The
 * caller owns the returned string (release with [`uba_string_free`]).
 */
char *uba_last_error_message(void);

/**
 * Releases a string obtained from this library.
 *
 * # Safety
 * `s` must come from [`uba_last_error_message`] and not be freed twice.
 */
void uba_string_free(char *s);

/**
 * Parses a HOA v1 document (state-based Büchi acceptance).
 *
 * # Safety
 * `text` must be a valid NUL-terminated string; `out` non-null.
 */
uba_status uba_automaton_parse_hoa(const char *text, uba_automaton **out);

/**
 * Releases an automaton handle.
 *
 * # Safety
 * `a` must come from [`uba_automaton_parse_hoa`] and not be freed twice.
 */
void uba_automaton_free(uba_automaton *a);

/**
 * Number of automaton states; 0 for a null handle.
 */
uintptr_t uba_automaton_num_states(const uba_automaton *a);

/**
 * Parses the textual DTMC format.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string; `out` non-null.
 */
uba_status uba_dtmc_parse(const char *text, uba_dtmc **out);

/**
 * Releases a chain handle.
 *
 * # Safety
 * `d` must come from [`uba_dtmc_parse`] and not be freed twice.
 */
void uba_dtmc_free(uba_dtmc *d);

/**
 * Probability that the chain satisfies the automaton.
 *
 * # Safety
 * `a`, `d`, `out` must be valid; `opts` may be null for defaults.
 */
uba_status uba_measure(const uba_automaton *a,
                       const uba_dtmc *d,
                       const uba_options *opts,
                       double *out);

/**
 * Probability of the automaton's language under the uniform measure.
 *
 * # Safety
 * `a`, `out` must be valid; `opts` may be null for defaults.
 */
uba_status uba_measure_uniform(const uba_automaton *a, const uba_options *opts, double *out);

/**
 * Does the automaton accept almost all infinite words?
 *
 * # Safety
 * `a`, `out` must be valid; `opts` may be null for defaults.
 */
uba_status uba_almost_universal(const uba_automaton *a, const uba_options *opts, bool *out);

/**
 * Checks that every word has at most one accepting run.
 *
 * # Safety
 * `a`, `out` must be valid.
 */
uba_status uba_verify_unambiguous(const uba_automaton *a, bool *out);

/**
 * Exact powerset-absorption probability for strongly connected
 * automata (ground-truth oracle).
 *
 * # Safety
 * `a`, `d`, `out` must be valid.
 */
uba_status uba_oracle(const uba_automaton *a, const uba_dtmc *d, double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* UBA_CHECK_H */
