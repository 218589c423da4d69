#ifndef ESCAPE_LAB_H
#define ESCAPE_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EscStatus {
  ESC_STATUS_OK = 0,
  ESC_STATUS_NULL_POINTER = 1,
  ESC_STATUS_INVALID_ARGUMENT = 2,
  ESC_STATUS_IO = 3,
  ESC_STATUS_PARSE = 4,
  ESC_STATUS_UNKNOWN_VERTEX = 5,
  ESC_STATUS_TRUNCATION_TOO_SMALL = 6,
  ESC_STATUS_ASSUMPTION_VIOLATED = 7,
  ESC_STATUS_OUT_OF_RANGE = 8,
  /**
   * The output buffer does not match the required length.
   */
  ESC_STATUS_BUFFER_TOO_SMALL = 9,
  ESC_STATUS_FAILED = 10,
  ESC_STATUS_PANIC = 11,
} EscStatus;

/**
 * Terminal state of a simulated run.
 */
typedef enum EscRunStatus {
  ESC_RUN_STATUS_HORIZON_REACHED = 0,
  ESC_RUN_STATUS_EXPLODED = 1,
  ESC_RUN_STATUS_BUDGET_EXHAUSTED = 2,
  ESC_RUN_STATUS_LEFT_TRUNCATION = 3,
} EscRunStatus;

/**
 * A weighted graph with its adapted weight. Opaque.
 */
typedef struct EscGraph EscGraph;

/**
 * Result of an experiment run. Opaque.
 */
typedef struct EscReport EscReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message on this thread into `buf` as a
 * NUL-terminated string and returns its length without the terminator.
 * Nothing is written if `buf` is null or `len` is 0.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t esc_last_error_message(char *buf, size_t len);

/**
 * Generates a truncated family graph. `family` is one of `birth-death`,
 * `anti-tree`, `tree` or `lattice`; `d` is used for lattices only.
 *
 * # Safety
 * `family` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EscStatus esc_graph_generate(const char *family,
                                  double alpha,
                                  double beta,
                                  double gamma,
                                  uint32_t d,
                                  uint32_t truncation,
                                  struct EscGraph **out);

/**
 * Loads a graph file. Subdivided files load as their modified graph; files
 * without σ get the default adapted weight.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EscStatus esc_graph_load(const char *path, struct EscGraph **out);

/**
 * Subdivides every edge into `n >= 2` pieces.
 *
 * # Safety
 * `g` must be a live handle and `out` a valid pointer.
 */
enum EscStatus esc_graph_subdivide_uniform(const struct EscGraph *g,
                                           uint32_t n,
                                           struct EscGraph **out);

/**
 * # Safety
 * `g` must be null or a handle not yet freed.
 */
void esc_graph_free(struct EscGraph *g);

/**
 * # Safety
 * `g` must be a live handle and `out` a valid pointer.
 */
enum EscStatus esc_graph_vertex_count(const struct EscGraph *g, size_t *out);

/**
 * Writes `d_σ(source, x)` for every vertex `x` in the graph's index order
 * into `out[0..len]`. `len` must equal the vertex count; unreachable
 * vertices get `+inf`.
 *
 * # Safety
 * `g` must be a live handle and `out` point to `len` writable doubles.
 */
enum EscStatus esc_metric(const struct EscGraph *g, uint64_t source, double *out, size_t len);

/**
 * Evaluates `ψ(r)` (`inverse == 0`) or `ψ⁻¹(r)` (`inverse != 0`) for the
 * measured volume profile around `center` with constant `c`, lower limit
 * `r_hat` and table end `r_max`.
 *
 * # Safety
 * `g` must be a live handle and `out` a valid pointer.
 */
enum EscStatus esc_psi(const struct EscGraph *g,
                       uint64_t center,
                       double c,
                       double r_hat,
                       double r_max,
                       double r,
                       int32_t inverse,
                       double *out);

/**
 * Simulates one run from original vertex `start` on stream `stream` of
 * `seed`.
 *
 * # Safety
 * `g` must be a live handle; the out pointers must be valid.
 */
enum EscStatus esc_simulate(const struct EscGraph *g,
                            uint64_t start,
                            double horizon,
                            uint64_t budget,
                            uint64_t seed,
                            uint64_t stream,
                            double *end_time,
                            uint64_t *jumps,
                            enum EscRunStatus *status);

/**
 * Runs an experiment described by a JSON config (the CLI `--config`
 * format).
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EscStatus esc_experiment_run(const char *config_json, struct EscReport **out);

/**
 * Looks up a named metric. Unknown names give `InvalidArgument`; a metric
 * without a standard error reports `NaN` there.
 *
 * # Safety
 * `r` must be a live handle, `name` a NUL-terminated string; `std_error`
 * may be null.
 */
enum EscStatus esc_report_metric(const struct EscReport *r,
                                 const char *name,
                                 double *value,
                                 double *std_error);

/**
 * `1` if the experiment's criterion passed, `0` if it failed, `-1` if the
 * experiment has no criterion.
 *
 * # Safety
 * `r` must be a live handle and `out` a valid pointer.
 */
enum EscStatus esc_report_passed(const struct EscReport *r, int32_t *out);

/**
 * Writes the report files into `dir`, creating it if needed.
 *
 * # Safety
 * `r` must be a live handle and `dir` a NUL-terminated string.
 */
enum EscStatus esc_report_write(const struct EscReport *r, const char *dir);

/**
 * # Safety
 * `r` must be null or a handle not yet freed.
 */
void esc_report_free(struct EscReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ESCAPE_LAB_H */
