#ifndef SSL_LAB_H
#define SSL_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SslStatus {
  SSL_STATUS_OK = 0,
  // Null pointer, non-UTF-8 string or out-of-range argument.
  SSL_STATUS_INVALID_ARGUMENT = 1,
  // Bad configuration, method id or split request.
  SSL_STATUS_CONFIG = 2,
  // File could not be read or written, or had the wrong format.
  SSL_STATUS_IO = 3,
  // Singular system or failed solver.
  SSL_STATUS_NUMERICAL = 4,
  // Evaluation undefined, e.g. a test set without positives.
  SSL_STATUS_EVALUATION = 5,
  // Internal invariant violated or panic caught at the boundary.
  SSL_STATUS_INTERNAL = 6,
} SslStatus;

// Synthetic dataset or one loaded from CSV.
typedef struct SslDataset SslDataset;

// Labeled / unlabeled-train / test partition of a dataset.
typedef struct SslSplit SslSplit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ssl_version(void);

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len - 1` bytes) and returns the full message
// length in bytes. An empty message means the last call succeeded.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ssl_last_error_message(char *buf, size_t len);

// Generates a synthetic dataset with `group_count` descriptor groups of
// dimensions `dims`, all sharing `noise`.
//
// # Safety
// `dims` must point to `group_count` values and `out` must be writable.
enum SslStatus ssl_synth_generate(size_t class_count,
                                  size_t samples_per_class,
                                  const size_t *dims,
                                  size_t group_count,
                                  double noise,
                                  double manifold_strength,
                                  uint64_t seed,
                                  struct SslDataset **out);

// Loads a dataset from the CSV layout written by [`ssl_dataset_write_csv`].
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum SslStatus ssl_dataset_read_csv(const char *path, struct SslDataset **out);

// # Safety
// `data` must be a live handle and `path` a NUL-terminated string.
enum SslStatus ssl_dataset_write_csv(const struct SslDataset *data, const char *path);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `data` must be null or a live handle.
size_t ssl_dataset_sample_count(const struct SslDataset *data);

// Number of classes, or 0 for a null handle.
//
// # Safety
// `data` must be null or a live handle.
size_t ssl_dataset_class_count(const struct SslDataset *data);

// # Safety
// `data` must be null or a handle not yet freed.
void ssl_dataset_free(struct SslDataset *data);

// Stratified split with a fixed held-out test share per class.
// `unlabeled_fraction` selects the unlabeled-train part of the remaining
// pool; `leak != 0` also appends the test ids to unlabeled-train.
//
// # Safety
// `data` must be a live handle and `out` writable.
enum SslStatus ssl_split_holdout(const struct SslDataset *data,
                                 size_t n_labeled_per_class,
                                 double unlabeled_fraction,
                                 double holdout_fraction,
                                 int32_t leak,
                                 uint64_t seed,
                                 struct SslSplit **out);

// Sizes of the labeled, unlabeled-train and test roles.
//
// # Safety
// `split` must be a live handle; output pointers must be writable.
enum SslStatus ssl_split_sizes(const struct SslSplit *split,
                               size_t *labeled,
                               size_t *unlabeled,
                               size_t *test);

// # Safety
// `split` must be null or a handle not yet freed.
void ssl_split_free(struct SslSplit *split);

// Trains method `method` (e.g. `"svm_chi2"`, `"enpro"`) with its default
// settings and writes the test-set mean average precision to `map`.
//
// # Safety
// Handles must be live, `method` NUL-terminated and `map` writable.
enum SslStatus ssl_run_method(const char *method,
                              const struct SslDataset *data,
                              const struct SslSplit *split,
                              double *map);

// Non-interpolated average precision of `scores` against 0/1 `relevance`.
//
// # Safety
// `scores` and `relevance` must point to `len` values; `out` writable.
enum SslStatus ssl_average_precision(const double *scores,
                                     const uint8_t *relevance,
                                     size_t len,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSL_LAB_H */
