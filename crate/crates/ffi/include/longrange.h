#ifndef LONGRANGE_H
#define LONGRANGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LrStatus {
  LR_STATUS_OK = 0,
  LR_STATUS_NULL_POINTER = 1,
  LR_STATUS_INVALID_ARGUMENT = 2,
  LR_STATUS_INVALID_SIZE = 3,
  LR_STATUS_DIMENSION_MISMATCH = 4,
  LR_STATUS_PARSE = 5,
  LR_STATUS_NUMERICAL = 6,
  LR_STATUS_DEGENERATE = 7,
  LR_STATUS_PANIC = 8,
  LR_STATUS_INTERNAL = 9,
} LrStatus;

typedef enum LrMetric {
  LR_METRIC_SPD = 0,
  LR_METRIC_RESISTANCE = 1,
} LrMetric;

/**
 * All-pairs distance matrix.
 */
typedef struct LrDistances LrDistances;

/**
 * Undirected simple graph.
 */
typedef struct LrGraph LrGraph;

/**
 * A task whose range can be measured.
 */
typedef struct LrTask LrTask;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *lr_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *lr_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void lr_string_free(char *s);

/**
 * # Safety
 * `out` must be a valid pointer to write a handle to.
 */
enum LrStatus lr_graph_line(size_t n, struct LrGraph **out);

/**
 * # Safety
 * `out` must be a valid pointer to write a handle to.
 */
enum LrStatus lr_graph_cycle(size_t n, struct LrGraph **out);

/**
 * # Safety
 * `out` must be a valid pointer to write a handle to.
 */
enum LrStatus lr_graph_grid2d(size_t h, size_t w, struct LrGraph **out);

/**
 * # Safety
 * `out` must be a valid pointer to write a handle to.
 */
enum LrStatus lr_graph_erdos_renyi(size_t n, double p, uint64_t seed, struct LrGraph **out);

/**
 * Builds a graph from `m` pairs stored flat in `edges` (`2m` entries).
 * Duplicates and self-loops are dropped.
 *
 * # Safety
 * `edges` must point to `2 * m` readable values; `out` must be writable.
 */
enum LrStatus lr_graph_from_edges(size_t n, const size_t *edges, size_t m, struct LrGraph **out);

/**
 * Parses edge-list text (`n m` header, then `u v` lines).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum LrStatus lr_graph_from_edge_list(const char *text, struct LrGraph **out);

/**
 * # Safety
 * `g` must be a live graph handle; `n` must be writable.
 */
enum LrStatus lr_graph_node_count(const struct LrGraph *g, size_t *n);

/**
 * # Safety
 * `g` must be a live graph handle; `m` must be writable.
 */
enum LrStatus lr_graph_edge_count(const struct LrGraph *g, size_t *m);

/**
 * # Safety
 * `g` must be NULL or a handle from this library that was not yet freed.
 */
void lr_graph_free(struct LrGraph *g);

/**
 * # Safety
 * `g` must be a live graph handle; `out` must be writable.
 */
enum LrStatus lr_distances_compute(const struct LrGraph *g,
                                   enum LrMetric metric,
                                   struct LrDistances **out);

/**
 * Distance between `u` and `v`; zero across components.
 *
 * # Safety
 * `d` must be a live handle; `value` must be writable.
 */
enum LrStatus lr_distances_get(const struct LrDistances *d, size_t u, size_t v, double *value);

/**
 * Whether `u` and `v` lie in different components.
 *
 * # Safety
 * `d` must be a live handle; `cross` must be writable.
 */
enum LrStatus lr_distances_is_cross_component(const struct LrDistances *d,
                                              size_t u,
                                              size_t v,
                                              bool *cross);

/**
 * # Safety
 * `d` must be NULL or a handle from this library that was not yet freed.
 */
void lr_distances_free(struct LrDistances *d);

/**
 * Row-normalized `Â^k` (with or without self-loops).
 *
 * # Safety
 * `g` must be a live graph handle; `out` must be writable.
 */
enum LrStatus lr_task_k_power(const struct LrGraph *g,
                              size_t k,
                              bool self_loops,
                              struct LrTask **out);

/**
 * # Safety
 * `g` must be a live graph handle; `out` must be writable.
 */
enum LrStatus lr_task_k_rectangle(const struct LrGraph *g, size_t k, struct LrTask **out);

/**
 * # Safety
 * `g` must be a live graph handle; `out` must be writable.
 */
enum LrStatus lr_task_k_dirac(const struct LrGraph *g, size_t k, struct LrTask **out);

/**
 * Linear task `y = L x` from a row-major `n x n` matrix.
 *
 * # Safety
 * `matrix` must point to `n * n` readable values; `out` must be writable.
 */
enum LrStatus lr_task_custom(size_t n, const double *matrix, struct LrTask **out);

/**
 * Node-level squared difference averaged over the `k`-hop neighborhood.
 *
 * # Safety
 * `g` must be a live graph handle; `out` must be writable.
 */
enum LrStatus lr_task_squared_difference_node(const struct LrGraph *g,
                                              size_t k,
                                              struct LrTask **out);

/**
 * Mean-pooled squared difference over `k`-hop neighborhoods.
 *
 * # Safety
 * `g` must be a live graph handle; `out` must be writable.
 */
enum LrStatus lr_task_squared_difference_graph(const struct LrGraph *g,
                                               size_t k,
                                               struct LrTask **out);

/**
 * Whether the task's range comes from second derivatives.
 *
 * # Safety
 * `t` must be a live task handle; `graph_level` must be writable.
 */
enum LrStatus lr_task_is_graph_level(const struct LrTask *t, bool *graph_level);

/**
 * # Safety
 * `t` must be NULL or a handle from this library that was not yet freed.
 */
void lr_task_free(struct LrTask *t);

/**
 * Node ranges of a task at input `x` (`n` values, or NULL for zeros; linear
 * tasks ignore it). `node_ranges` receives `n` values; `graph_range` and
 * `degenerate_count` may be NULL.
 *
 * # Safety
 * Handles must be live; `x` is NULL or holds `n` values; `node_ranges` has
 * room for `len >= n` values.
 */
enum LrStatus lr_task_range(const struct LrTask *t,
                            const struct LrDistances *d,
                            const double *x,
                            bool normalized,
                            double *node_ranges,
                            size_t len,
                            double *graph_range,
                            size_t *degenerate_count);

/**
 * Range report as a JSON string, released with [`lr_string_free`].
 *
 * # Safety
 * Handles must be live; `x` is NULL or holds `n` values; `json` must be
 * writable.
 */
enum LrStatus lr_task_range_json(const struct LrTask *t,
                                 const struct LrDistances *d,
                                 const double *x,
                                 bool normalized,
                                 char **json);

/**
 * Expected normalized SPD range of the node-level squared-difference task
 * at node `u` under Gaussian inputs.
 *
 * # Safety
 * `g` must be a live graph handle; `value` must be writable.
 */
enum LrStatus lr_analytic_node_range(const struct LrGraph *g, size_t u, size_t k, double *value);

/**
 * Normalized SPD range of the pooled squared-difference task at node `u`.
 *
 * # Safety
 * `g` must be a live graph handle; `value` must be writable.
 */
enum LrStatus lr_analytic_graph_range(const struct LrGraph *g, size_t u, size_t k, double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LONGRANGE_H */
