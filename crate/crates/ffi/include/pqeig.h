/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef PQEIG_H
#define PQEIG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PqStatus {
  PQ_STATUS_OK = 0,
  PQ_STATUS_INVALID_ARGUMENT = 1,
  PQ_STATUS_NULL_POINTER = 2,
  PQ_STATUS_STAGNATION = 3,
  PQ_STATUS_NUMERICAL = 4,
  PQ_STATUS_PANIC = 5,
} PqStatus;

// Opaque discretized domain.
typedef struct PqDomain PqDomain;

// Opaque solve result.
typedef struct PqEigenResult PqEigenResult;

// Solver settings. Obtain defaults from `pq_solver_options_default`.
typedef struct PqSolverOptions {
  uint64_t max_iter;
  double tol_grad;
  double tol_constraint;
  double step0;
  double backtrack_factor;
  uint64_t seed;
  uint64_t memory;
} PqSolverOptions;

// Closed form and oracle value for a rectangle.
typedef struct PqOracleReport {
  double formula_value;
  double oracle_value;
  double apex_value;
  double rel_gap;
  // 1 for the ball branch, 2 for the thin branch.
  uint8_t branch;
  bool agreement;
} PqOracleReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`) and returns the full message length including the
// NUL, or 0 when there is no error. Pass a null `buf` to query the length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t pq_last_error_message(char *buf, size_t len);

struct PqSolverOptions pq_solver_options_default(void);

// Rectangle `(-r, r) x (-l, l)` with `nx * ny` nodes.
//
// # Safety
// `out` must be null or valid for a write.
enum PqStatus pq_domain_rectangle(double r, double l, size_t nx, size_t ny, struct PqDomain **out);

// Disk of radius `r` on an `n x n` grid, `n` odd.
//
// # Safety
// `out` must be null or valid for a write.
enum PqStatus pq_domain_disk(double r, size_t n, struct PqDomain **out);

// Grid dimensions of a domain.
//
// # Safety
// `dom` must be null or a live handle; `nx`, `ny` null or valid for writes.
enum PqStatus pq_domain_dims(const struct PqDomain *dom, size_t *nx, size_t *ny);

// Releases a domain. Null is a no-op.
//
// # Safety
// `dom` must be null or a handle from `pq_domain_*` not yet freed.
void pq_domain_free(struct PqDomain *dom);

// Solves for the first nontrivial eigenpair with `beta = q (1 - alpha/p)`.
// `opts` may be null for defaults. A run that stops at `max_iter` still
// returns a result with status `PQ_STATUS_STAGNATION`.
//
// # Safety
// `dom` must be a live handle, `opts` null or valid, `out` valid for a write.
enum PqStatus pq_solve(const struct PqDomain *dom,
                       double p,
                       double q,
                       double alpha,
                       const struct PqSolverOptions *opts,
                       struct PqEigenResult **out);

// # Safety
// `res` must be null or a live handle; `out` null or valid for a write.
enum PqStatus pq_result_lambda(const struct PqEigenResult *res, double *out);

// # Safety
// `res` must be null or a live handle; `out` null or valid for a write.
enum PqStatus pq_result_lambda_root_p(const struct PqEigenResult *res, double *out);

// # Safety
// `res` must be null or a live handle; `out` null or valid for a write.
enum PqStatus pq_result_iterations(const struct PqEigenResult *res, uint64_t *out);

// Copies `u` and `v` in row-major order (`x` index outer) into buffers of
// `len = nx * ny` values each.
//
// # Safety
// `res` must be null or a live handle; `u`, `v` null or valid for `len`
// writes.
enum PqStatus pq_result_fields(const struct PqEigenResult *res, double *u, double *v, size_t len);

// Releases a result. Null is a no-op.
//
// # Safety
// `res` must be null or a handle from `pq_solve` not yet freed.
void pq_result_free(struct PqEigenResult *res);

// Limit value on the ball of radius `r`.
//
// # Safety
// `out` must be null or valid for a write.
enum PqStatus pq_lambda_inf_ball(double gamma, double big_q, double r, double *out);

// Two-branch limit value on `(-r, r) x (-l, l)`; `branch` may be null.
//
// # Safety
// `out` must be null or valid for a write; `branch` null or valid.
enum PqStatus pq_lambda_inf_rectangle(double gamma,
                                      double big_q,
                                      double r,
                                      double l,
                                      double *out,
                                      uint8_t *branch);

// Closed form against the brute-force cone/plane oracle with `samples`
// points per scan (at least 1000).
//
// # Safety
// `out` must be null or valid for a write.
enum PqStatus pq_oracle_rectangle(double gamma,
                                  double big_q,
                                  double r,
                                  double l,
                                  size_t samples,
                                  struct PqOracleReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PQEIG_H */
