#ifndef DYNGNN_H
#define DYNGNN_H

#include <stddef.h>
#include <stdint.h>

// Result codes. Zero is success.
typedef enum DgnnStatus {
  DGNN_STATUS_OK = 0,
  DGNN_STATUS_NULL_POINTER = 1,
  DGNN_STATUS_INVALID_INPUT = 2,
  DGNN_STATUS_CONFIG = 3,
  DGNN_STATUS_PARSE = 4,
  DGNN_STATUS_CORRUPT_DELTA = 5,
  DGNN_STATUS_PROTOCOL = 6,
  DGNN_STATUS_IO = 7,
  // A string argument was not valid UTF-8.
  DGNN_STATUS_UTF8 = 8,
  // A Rust panic was caught at the boundary.
  DGNN_STATUS_PANIC = 9,
} DgnnStatus;

// A dynamic graph: a sequence of sparse snapshots over a fixed vertex set.
typedef struct DgnnGraph DgnnGraph;

// Entries shipped by graph-difference streaming and by sending every
// snapshot in full.
typedef struct DgnnTransferCost {
  uint64_t delta_index_entries;
  uint64_t delta_value_entries;
  uint64_t naive_index_entries;
  uint64_t naive_value_entries;
} DgnnTransferCost;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *dgnn_version(void);

// Message of the last failed call on this thread, or null. Valid until the
// next library call on the same thread.
const char *dgnn_last_error_message(void);

// Generates a random graph with `round(vertices * density)` edges per
// snapshot.
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
enum DgnnStatus dgnn_graph_generate(size_t timesteps,
                                    size_t vertices,
                                    double density,
                                    uint64_t seed,
                                    struct DgnnGraph **out);

// Reads a graph from an edge-list file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum DgnnStatus dgnn_graph_load(const char *path, struct DgnnGraph **out);

// Writes a graph as an edge-list file.
//
// # Safety
// `graph` must be a live handle and `path` a NUL-terminated string.
enum DgnnStatus dgnn_graph_save(const struct DgnnGraph *graph, const char *path);

// Releases a graph. Null is ignored.
//
// # Safety
// `graph` must be null or a handle not yet freed.
void dgnn_graph_free(struct DgnnGraph *graph);

// # Safety
// `graph` must be a live handle and `out` a valid pointer.
enum DgnnStatus dgnn_graph_num_vertices(const struct DgnnGraph *graph, size_t *out);

// # Safety
// `graph` must be a live handle and `out` a valid pointer.
enum DgnnStatus dgnn_graph_num_timesteps(const struct DgnnGraph *graph, size_t *out);

// Stored entries of snapshot `t`.
//
// # Safety
// `graph` must be a live handle and `out` a valid pointer.
enum DgnnStatus dgnn_graph_snapshot_nnz(const struct DgnnGraph *graph, size_t t, size_t *out);

// Cost of shipping the graph's snapshots to `workers` workers over
// `blocks` blocks, with and without graph-difference streaming.
//
// # Safety
// `graph` must be a live handle and `out` a valid pointer.
enum DgnnStatus dgnn_transfer_cost(const struct DgnnGraph *graph,
                                   size_t workers,
                                   size_t blocks,
                                   struct DgnnTransferCost *out);

// Trains a link-prediction model on `graph` and returns the run report as
// JSON. `config_toml` may be null for defaults; it takes the same keys as
// the command-line config file.
//
// # Safety
// `graph` must be a live handle, `config_toml` null or a NUL-terminated
// string, and `out_json` a valid pointer. The returned string must be
// released with [`dgnn_string_free`].
enum DgnnStatus dgnn_train_json(const struct DgnnGraph *graph,
                                const char *config_toml,
                                char **out_json);

// Communication volume of snapshot and vertex partitioning for each of
// the `num_workers` worker counts, as JSON.
//
// # Safety
// As for [`dgnn_train_json`]; `workers` must point to `num_workers`
// values.
enum DgnnStatus dgnn_compare_partitioning_json(const struct DgnnGraph *graph,
                                               const char *config_toml,
                                               const size_t *workers,
                                               size_t num_workers,
                                               char **out_json);

// Releases a string returned by the library. Null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void dgnn_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNGNN_H */
