/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef CDPR_H
#define CDPR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Length of a configuration or cable-length array.
#define CDPR_DOF 8

// Result of every fallible call.
typedef enum CdprStatus {
  CDPR_STATUS_OK = 0,
  CDPR_STATUS_NULL_POINTER = 1,
  CDPR_STATUS_INVALID_ARGUMENT = 2,
  // Scenario JSON could not be parsed.
  CDPR_STATUS_PARSE = 3,
  // Scenario parsed but violates an invariant.
  CDPR_STATUS_INVALID_SCENARIO = 4,
  CDPR_STATUS_OUT_OF_STROKE = 5,
  CDPR_STATUS_SINGULAR = 6,
  CDPR_STATUS_NO_CONVERGENCE = 7,
  // Any other numerical failure (coil bind, infeasible statics, …).
  CDPR_STATUS_NUMERICAL = 8,
  // A Rust panic was caught at the boundary.  The handle may be reused.
  CDPR_STATUS_INTERNAL = 9,
} CdprStatus;

// Built-in canonical scenarios.
typedef enum CdprVariant {
  CDPR_VARIANT_A_SCREW = 0,
  CDPR_VARIANT_A_WINDER = 1,
  CDPR_VARIANT_B_GRIPPER = 2,
  CDPR_VARIANT_C_ROTATABLE_GRIPPER = 3,
} CdprVariant;

// Opaque model handle.
typedef struct CdprModel CdprModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a model from a NUL-terminated scenario JSON document.
//
// # Safety
// `json` must be a valid C string; `out` must point to writable storage.
enum CdprStatus cdpr_model_from_json(const char *json, struct CdprModel **out);

// Creates a model from one of the built-in canonical scenarios; `variant`
// is a `CdprVariant` value.
//
// # Safety
// `out` must point to writable storage.
enum CdprStatus cdpr_model_canonical(uint32_t variant, struct CdprModel **out);

// Releases a model.  Null is accepted and ignored.
//
// # Safety
// `model` must come from a `cdpr_model_*` constructor and not be used
// afterwards.
void cdpr_model_free(struct CdprModel *model);

// Copies the calling thread's last error message (NUL-terminated,
// truncated to fit) into `buf` and returns the full message length in
// bytes, excluding the terminator.  Pass a null `buf` to query the length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t cdpr_last_error_message(char *buf, size_t len);

// Cable lengths (m) of configuration `q`.
//
// # Safety
// `q` and `lengths_out` must each point to 8 doubles.
enum CdprStatus cdpr_ik(const struct CdprModel *model, const double *q, double *lengths_out);

// Configuration with the given cable lengths, searched from `guess` with
// the default damped-Newton options.  `iterations_out` may be null.
//
// # Safety
// `lengths`, `guess` and `q_out` must each point to 8 doubles;
// `iterations_out` must be null or writable.
enum CdprStatus cdpr_fk(const struct CdprModel *model,
                        const double *lengths,
                        const double *guess,
                        double *q_out,
                        uint32_t *iterations_out);

// 8×8 cable-length Jacobian, row-major (row = cable), and optionally its
// condition number with rotational columns scaled by the scenario's
// characteristic length.  `condition_out` may be null.
//
// # Safety
// `q` must point to 8 doubles, `jacobian_out` to 64; `condition_out` must
// be null or writable.
enum CdprStatus cdpr_jacobian(const struct CdprModel *model,
                              const double *q,
                              double *jacobian_out,
                              double *condition_out);

// Unique static cable tensions (N) holding configuration `q` against
// gravity and the mechanism springs.  `feasible_out` (may be null) is set
// to 1 when every tension lies within the scenario's bounds, else 0; the
// tensions are written either way.
//
// # Safety
// `q` and `tensions_out` must each point to 8 doubles; `feasible_out`
// must be null or writable.
enum CdprStatus cdpr_solve_tensions(const struct CdprModel *model,
                                    const double *q,
                                    double *tensions_out,
                                    int32_t *feasible_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CDPR_H */
