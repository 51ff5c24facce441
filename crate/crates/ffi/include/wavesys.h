/* Generated by cbindgen; do not edit. */

#ifndef WAVESYS_H
#define WAVESYS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WsStatus {
  WS_STATUS_OK = 0,
  /**
   * A verification ran and its aggregate verdict is negative.
   */
  WS_STATUS_VERDICT = 1,
  WS_STATUS_BLOWUP = 2,
  WS_STATUS_INPUT = 3,
  WS_STATUS_NUMERICAL = 4,
  WS_STATUS_NULL_POINTER = 5,
  WS_STATUS_PANIC = 6,
} WsStatus;

typedef enum WsMollifier {
  WS_MOLLIFIER_MODEL = 0,
  WS_MOLLIFIER_LOG = 1,
} WsMollifier;

typedef enum WsCase {
  WS_CASE_A = 0,
  WS_CASE_B = 1,
  WS_CASE_C = 2,
} WsCase;

typedef enum WsSolver {
  WS_SOLVER_SYSTEM = 0,
  WS_SOLVER_WAVE = 1,
} WsSolver;

typedef enum WsClassKind {
  WS_CLASS_KIND_NEGLIGIBLE = 0,
  WS_CLASS_KIND_BOUNDED = 1,
  WS_CLASS_KIND_LOG_TYPE = 2,
  WS_CLASS_KIND_MODERATE = 3,
  WS_CLASS_KIND_DIVERGENT = 4,
} WsClassKind;

/**
 * A parsed spec and the problem built from it.
 */
typedef struct WsProblem WsProblem;

typedef struct WsReport WsReport;

typedef struct WsSolution WsSolution;

typedef struct WsClassification {
  enum WsClassKind kind;
  /**
   * `N` for a moderate class, otherwise 0.
   */
  uint32_t order;
  /**
   * Fitted power exponent; NaN when no fit was made.
   */
  double exponent;
  /**
   * Fitted log coefficient; NaN when no fit was made.
   */
  double log_coefficient;
} WsClassification;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *ws_last_error(void);

/**
 * Static description of a status code.
 */
const char *ws_status_name(enum WsStatus status);

/**
 * Parses a spec document and builds its problem.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum WsStatus ws_problem_from_spec(const char *text, struct WsProblem **out);

/**
 * Builds one of the named example problems.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum WsStatus ws_problem_from_builtin(const char *name, struct WsProblem **out);

/**
 * # Safety
 * `p` must be null or a handle from `ws_problem_from_*` not yet freed.
 */
void ws_problem_free(struct WsProblem *p);

/**
 * Rebuilds the problem with one mollifier for every coefficient.
 *
 * # Safety
 * `p` must be a live problem handle.
 */
enum WsStatus ws_problem_set_mollifier(struct WsProblem *p, enum WsMollifier mollifier);

/**
 * # Safety
 * `p` must be a live problem handle; `out` must be writable.
 */
enum WsStatus ws_problem_dim(const struct WsProblem *p, size_t *out);

/**
 * Checks the hypotheses of `case` on the wave form. Returns `Ok` or
 * `Verdict`; the report is written in both cases.
 *
 * # Safety
 * `p` must be a live problem handle; `out` must be writable.
 */
enum WsStatus ws_verify(const struct WsProblem *p, enum WsCase case_, struct WsReport **out);

/**
 * # Safety
 * `r` must be a live report handle; out pointers must be writable.
 */
enum WsStatus ws_report_counts(const struct WsReport *r, size_t *hypotheses, size_t *failures);

/**
 * Whether every hypothesis on `net` passes.
 *
 * # Safety
 * `r` must be a live report handle, `net` NUL-terminated and `out`
 * writable.
 */
enum WsStatus ws_report_net_passes(const struct WsReport *r, const char *net, bool *out);

/**
 * The full report as JSON, owned by the handle.
 *
 * # Safety
 * `r` must be null or a live report handle.
 */
const char *ws_report_json(const struct WsReport *r);

/**
 * # Safety
 * `r` must be null or a report handle not yet freed.
 */
void ws_report_free(struct WsReport *r);

/**
 * Solves at one ε with the spec's grid.
 *
 * # Safety
 * `p` must be a live problem handle; `out` must be writable.
 */
enum WsStatus ws_solve(const struct WsProblem *p,
                       double eps,
                       enum WsSolver solver,
                       struct WsSolution **out);

/**
 * Node count, components per node and final time.
 *
 * # Safety
 * `s` must be a live solution handle; out pointers must be writable.
 */
enum WsStatus ws_solution_shape(const struct WsSolution *s,
                                size_t *nodes,
                                size_t *components,
                                double *final_time);

/**
 * Copies one component at the final time into `buf` of length `len`,
 * which must equal the node count.
 *
 * # Safety
 * `s` must be a live solution handle and `buf` valid for `len` writes.
 */
enum WsStatus ws_solution_component(const struct WsSolution *s,
                                    size_t component,
                                    double *buf,
                                    size_t len);

/**
 * # Safety
 * `s` must be null or a solution handle not yet freed.
 */
void ws_solution_free(struct WsSolution *s);

/**
 * Observed orders of the system/wave discrepancy and of the relation
 * residual over the spec's grid steps.
 *
 * # Safety
 * `p` must be a live problem handle; out pointers must be writable.
 */
enum WsStatus ws_equivalence_orders(const struct WsProblem *p,
                                    double *discrepancy_order,
                                    double *relation_order);

/**
 * Classifies a sweep of `n` norm values with the default thresholds.
 *
 * # Safety
 * `eps` and `values` must be valid for `n` reads; `out` must be writable.
 */
enum WsStatus ws_classify(const double *eps,
                          const double *values,
                          size_t n,
                          struct WsClassification *out);

/**
 * SPD square root of the row-major `n × n` matrix `r` into `s`.
 *
 * # Safety
 * `r` must be valid for `n²` reads and `s` for `n²` writes.
 */
enum WsStatus ws_spd_sqrt(const double *r, size_t n, double *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVESYS_H */
