#ifndef PHASEGN_H
#define PHASEGN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PG_FIELD_REAL 0

#define PG_FIELD_COMPLEX 1

#define PG_INIT_EXP_SPECTRAL 0

#define PG_INIT_SPECTRAL 1

#define PG_INIT_TRUNCATED_SPECTRAL 2

#define PG_INIT_NULL 3

#define PG_SOLVER_GN 0

#define PG_SOLVER_WF 1

#define PG_SOLVER_ALTMIN 2

typedef enum PgStatus {
  PG_STATUS_OK = 0,
  PG_STATUS_NULL_POINTER = 1,
  PG_STATUS_INVALID_ARGUMENT = 2,
  PG_STATUS_DIMENSION_MISMATCH = 3,
  PG_STATUS_FIELD_MISMATCH = 4,
  // Singular systems, failed decompositions and degenerate data.
  PG_STATUS_NUMERICAL = 5,
  PG_STATUS_IO = 6,
  PG_STATUS_PANIC = 7,
} PgStatus;

typedef enum PgSolveStatus {
  PG_SOLVE_STATUS_CONVERGED = 0,
  PG_SOLVE_STATUS_MAX_ITERATIONS = 1,
  PG_SOLVE_STATUS_COMPLETED = 2,
  PG_SOLVE_STATUS_STEP_FAILED = 3,
  PG_SOLVE_STATUS_DIVERGED = 4,
} PgSolveStatus;

typedef struct PgEnsemble PgEnsemble;

typedef struct PgObservations PgObservations;

typedef struct PgSignal PgSignal;

typedef struct PgTrace PgTrace;

// Iteration cap and stopping tolerances; see `pg_solver_options_default`.
typedef struct PgSolverOptions {
  size_t max_iters;
  // Against `dist(x_k, z)/||z||` when the truth is passed.
  double rel_err_tol;
  // Against `||F(x_k)||/||y||` otherwise.
  double residual_tol;
} PgSolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *pg_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *pg_version(void);

// Gaussian sensing vectors; deterministic in `seed`.
enum PgStatus pg_ensemble_sample(size_t m,
                                 size_t n,
                                 uint32_t field_code,
                                 uint64_t seed,
                                 struct PgEnsemble **out);

// Sensing vectors `a_j` as rows of a row-major `m x n` array
// (`m * n * 2` doubles when complex).
enum PgStatus pg_ensemble_from_data(size_t m,
                                    size_t n,
                                    uint32_t field_code,
                                    const double *data,
                                    struct PgEnsemble **out);

size_t pg_ensemble_m(const struct PgEnsemble *e);

size_t pg_ensemble_n(const struct PgEnsemble *e);

void pg_ensemble_free(struct PgEnsemble *e);

// `n` entries (`2 n` doubles when complex).
enum PgStatus pg_signal_new(size_t n,
                            uint32_t field_code,
                            const double *data,
                            struct PgSignal **out);

// Standard Gaussian signal; deterministic in `seed`.
enum PgStatus pg_signal_random(size_t n, uint32_t field_code, uint64_t seed, struct PgSignal **out);

size_t pg_signal_len(const struct PgSignal *s);

// `PG_FIELD_REAL` or `PG_FIELD_COMPLEX`; `UINT32_MAX` for a null handle.
uint32_t pg_signal_field(const struct PgSignal *s);

// Copy the entries into `out`; `len` must be `n` (real) or `2 n` (complex).
enum PgStatus pg_signal_copy(const struct PgSignal *s, double *out, size_t len);

void pg_signal_free(struct PgSignal *s);

// Phase-invariant distance `min_phi ||x - e^{i phi} z||`.
enum PgStatus pg_dist(const struct PgSignal *x, const struct PgSignal *z, double *out);

// `y_j = |a_j^H z|^2 + sigma * noise_j`; deterministic in `seed`.
enum PgStatus pg_observe(const struct PgEnsemble *e,
                         const struct PgSignal *z,
                         double sigma,
                         uint64_t seed,
                         struct PgObservations **out);

enum PgStatus pg_observations_new(const double *y, size_t m, struct PgObservations **out);

size_t pg_observations_len(const struct PgObservations *y);

// Copy the intensities into `out`; `len` must equal the count.
enum PgStatus pg_observations_copy(const struct PgObservations *y, double *out, size_t len);

void pg_observations_free(struct PgObservations *y);

// Spectral initializer; `method` is one of the `PG_INIT_*` codes and
// `signal_field` the field of the returned start.
enum PgStatus pg_initialize(const struct PgEnsemble *e,
                            const struct PgObservations *y,
                            uint32_t method,
                            uint32_t signal_field,
                            uint64_t seed,
                            struct PgSignal **out);

// Defaults for a `PG_SOLVER_*` kind: 100 iterations for Gauss-Newton, 2500
// for the baselines; tolerances `1e-5` and `1e-12`.
struct PgSolverOptions pg_solver_options_default(uint32_t kind);

// Gauss-Newton from `x0`. `truth` and `opts` may be null.
enum PgStatus pg_solve_gn(const struct PgEnsemble *e,
                          const struct PgObservations *y,
                          const struct PgSignal *x0,
                          const struct PgSignal *truth,
                          const struct PgSolverOptions *opts,
                          struct PgTrace **out);

// Re-sampled Gauss-Newton for real signals with target accuracy `epsilon`
// in `(0, 1/2)`; initializes itself from the first data block.
enum PgStatus pg_solve_gn_resampled(const struct PgEnsemble *e,
                                    const struct PgObservations *y,
                                    double epsilon,
                                    const struct PgSignal *truth,
                                    const struct PgSolverOptions *opts,
                                    struct PgTrace **out);

// Wirtinger flow from `x0`. `truth` and `opts` may be null.
enum PgStatus pg_wf_solve(const struct PgEnsemble *e,
                          const struct PgObservations *y,
                          const struct PgSignal *x0,
                          const struct PgSignal *truth,
                          const struct PgSolverOptions *opts,
                          struct PgTrace **out);

// Alternating minimization from `x0`. `truth` and `opts` may be null.
enum PgStatus pg_altmin_solve(const struct PgEnsemble *e,
                              const struct PgObservations *y,
                              const struct PgSignal *x0,
                              const struct PgSignal *truth,
                              const struct PgSolverOptions *opts,
                              struct PgTrace **out);

// Steps taken; the trace holds one more point than this.
size_t pg_trace_iterations(const struct PgTrace *t);

enum PgStatus pg_trace_status(const struct PgTrace *t, enum PgSolveStatus *out);

// Copy the relative errors of `x_0..x_T`; `len` must be iterations + 1.
enum PgStatus pg_trace_rel_errors(const struct PgTrace *t, double *out, size_t len);

// New signal handle holding the last iterate.
enum PgStatus pg_trace_final_iterate(const struct PgTrace *t, struct PgSignal **out);

// Write `iter,rel_err,residual,wall_ms,flags` rows to the UTF-8 `path`.
enum PgStatus pg_trace_write_csv(const struct PgTrace *t, const char *path);

void pg_trace_free(struct PgTrace *t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHASEGN_H */
