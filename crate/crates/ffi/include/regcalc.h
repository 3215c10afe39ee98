#ifndef REGCALC_H
#define REGCALC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RcStatus {
  RC_OK = 0,
  RC_NULL_POINTER = 1,
  RC_INVALID_UTF8 = 2,
  RC_PARSE_ERROR = 3,
  RC_EVAL_ERROR = 4,
  // A partial index map has no value at the given pair.
  RC_UNDEFINED = 5,
  RC_INVALID_ARGUMENT = 6,
  RC_ORDER_BUDGET = 7,
  RC_PANIC = 8,
} RcStatus;

// Opaque parsed expression.
typedef struct RcExpr RcExpr;

// Opaque distributive index structure.
typedef struct RcStructure RcStructure;

// A rational index `num/den` with `den > 0`.
typedef struct RcIndex {
  int64_t num;
  int64_t den;
} RcIndex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *rc_version(void);

// Copy of the last error message set on this thread, or NULL if the last
// call succeeded. Free with [`rc_string_free`].
char *rc_last_error_message(void);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void rc_string_free(char *s);

// Runs a `regcalc` command on TOML configuration text. `out_report`
// receives the structured JSON report and `out_exit_code` the command's
// exit code (0 pass, 1 fail, 2 inconclusive, 64 config, 65 precondition).
// Returns `RC_OK` whenever a report was produced.
//
// # Safety
// String arguments must be NULL or NUL-terminated; out pointers must be
// NULL or valid for writes.
enum RcStatus rc_run(const char *command,
                     const char *config,
                     int32_t *out_exit_code,
                     char **out_report);

// Parses an expression. On success `*out` owns a new handle.
//
// # Safety
// `source` must be NULL or NUL-terminated; `out` must be NULL or valid for
// writes.
enum RcStatus rc_expr_parse(const char *source, struct RcExpr **out_expr);

// # Safety
// `e` must be NULL or a handle from this library, not yet freed.
void rc_expr_free(struct RcExpr *e);

// Number of coordinates the expression reads (highest variable index).
//
// # Safety
// `e` must be NULL or a live handle.
enum RcStatus rc_expr_arity(const struct RcExpr *e, size_t *out_arity);

// Evaluates at `point[0..len]`. Domain violations return `RC_EVAL_ERROR`.
//
// # Safety
// `e` must be a live handle, `point` valid for `len` reads (or NULL when
// `len` is 0).
enum RcStatus rc_expr_eval(const struct RcExpr *e,
                           const double *point,
                           size_t len,
                           double *out_value);

// `order`-th partial derivative in coordinate `var` (1-based, `x1` is 1).
//
// # Safety
// `e` must be a live handle; `out_expr` NULL or valid for writes.
enum RcStatus rc_expr_derivative(const struct RcExpr *e,
                                 size_t var,
                                 uint32_t order,
                                 struct RcExpr **out_expr);

// Canonical printed form. Free with [`rc_string_free`].
//
// # Safety
// `e` must be NULL or a live handle.
char *rc_expr_to_string(const struct RcExpr *e);

// Builds a structure from its JSON form, e.g.
// `{"structure": "holder_lp", "exponents": [1, 2, 3]}`.
//
// # Safety
// `spec` must be NULL or NUL-terminated; `out_structure` NULL or valid for
// writes.
enum RcStatus rc_structure_from_json(const char *spec, struct RcStructure **out_structure);

// # Safety
// `s` must be NULL or a handle from this library, not yet freed.
void rc_structure_free(struct RcStructure *s);

// Product index `ε(i, j)`; `RC_UNDEFINED` where the map has no value.
//
// # Safety
// `s` must be a live handle; `out_index` NULL or valid for writes.
enum RcStatus rc_structure_eps(const struct RcStructure *s,
                               struct RcIndex i,
                               struct RcIndex j,
                               struct RcIndex *out_index);

// Sum index `δ(i, j)`; `RC_UNDEFINED` where the map has no value.
//
// # Safety
// `s` must be a live handle; `out_index` NULL or valid for writes.
enum RcStatus rc_structure_delta(const struct RcStructure *s,
                                 struct RcIndex i,
                                 struct RcIndex j,
                                 struct RcIndex *out_index);

// Exhaustively checks the distributivity laws and `δ(i,i) = i` on a
// finite base. `out_violations` receives the number of violated law
// instances plus idempotence failures; 0 means the structure passes.
//
// # Safety
// `s` must be a live handle; `out_violations` NULL or valid for writes.
enum RcStatus rc_structure_check_laws(const struct RcStructure *s, size_t *out_violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGCALC_H */
