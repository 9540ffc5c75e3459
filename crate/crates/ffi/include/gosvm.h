#ifndef GOSVM_H
#define GOSVM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GosvmStatus {
  GOSVM_STATUS_OK = 0,
  GOSVM_STATUS_NULL_POINTER = 1,
  GOSVM_STATUS_INVALID_ARGUMENT = 2,
  GOSVM_STATUS_IO = 3,
  GOSVM_STATUS_PARSE = 4,
  GOSVM_STATUS_DIMENSION_MISMATCH = 5,
  GOSVM_STATUS_INSUFFICIENT_DATA = 6,
  // ν or (ν_b, ν_o, α) outside the feasible range.
  GOSVM_STATUS_INFEASIBLE = 7,
  GOSVM_STATUS_SOLVER_FAILED = 8,
  GOSVM_STATUS_PANIC = 9,
} GosvmStatus;

typedef enum GosvmKernel {
  GOSVM_KERNEL_LINEAR = 0,
  GOSVM_KERNEL_RBF = 1,
} GosvmKernel;

typedef enum GosvmOrdering {
  GOSVM_ORDERING_GLOBAL = 0,
  GOSVM_ORDERING_PER_CLASS = 1,
} GosvmOrdering;

// Opaque labeled dataset.
typedef struct GosvmDataset GosvmDataset;

// Opaque trained model, with the ordering used for evaluation.
typedef struct GosvmModel GosvmModel;

// Test-set metrics. `liso` is NaN when the dataset has no oracle.
typedef struct GosvmEvaluation {
  double error_rate;
  double liso;
  double balance;
} GosvmEvaluation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Valid until the
// next call into the library on this thread.
const char *gosvm_last_error(void);

// Reads a dataset CSV (`f0..,label[,oracle]`).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum GosvmStatus gosvm_dataset_read(const char *path, struct GosvmDataset **out);

// Builds a dataset from a row-major `n × dim` feature matrix and `±1`
// labels. `oracle` may be null.
//
// # Safety
// `features` must point to `n*dim` values, `labels` to `n`, and `oracle`
// (if non-null) to `n`.
enum GosvmStatus gosvm_dataset_from_arrays(const double *features,
                                           const int8_t *labels,
                                           const double *oracle,
                                           size_t n,
                                           size_t dim,
                                           struct GosvmDataset **out);

// # Safety
// `ds` must be a live handle and `path` a NUL-terminated string.
enum GosvmStatus gosvm_dataset_write(const struct GosvmDataset *ds, const char *path);

// Number of samples; 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t gosvm_dataset_len(const struct GosvmDataset *ds);

// # Safety
// `ds` must be null or a live handle.
size_t gosvm_dataset_dim(const struct GosvmDataset *ds);

// # Safety
// `ds` must be null or a handle not yet freed.
void gosvm_dataset_free(struct GosvmDataset *ds);

// Trains a ν-SVM.
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum GosvmStatus gosvm_train_nusvm(const struct GosvmDataset *ds,
                                   double nu,
                                   enum GosvmKernel kernel,
                                   double width,
                                   struct GosvmModel **out);

// Trains a GO-SVM; the dataset needs an oracle column.
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum GosvmStatus gosvm_train_gosvm(const struct GosvmDataset *ds,
                                   double nu_b,
                                   double nu_o,
                                   double alpha,
                                   enum GosvmKernel kernel,
                                   double width,
                                   enum GosvmOrdering ordering,
                                   struct GosvmModel **out);

// Loads a model file written by the CLI or by [`gosvm_model_save`].
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum GosvmStatus gosvm_model_load(const char *path, struct GosvmModel **out);

// Saves the model (without GO-SVM training diagnostics).
//
// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum GosvmStatus gosvm_model_save(const struct GosvmModel *model, const char *path);

// # Safety
// `model` must be null or a live handle.
size_t gosvm_model_dim(const struct GosvmModel *model);

// Decision value `f(x)`; the sign is the predicted class (0 → −1).
//
// # Safety
// `x` must point to `dim` values; `out` must be writable.
enum GosvmStatus gosvm_model_predict(const struct GosvmModel *model,
                                     const double *x,
                                     size_t dim,
                                     double *out);

// # Safety
// Both handles must be live; `out` must be writable.
enum GosvmStatus gosvm_model_evaluate(const struct GosvmModel *model,
                                      const struct GosvmDataset *ds,
                                      struct GosvmEvaluation *out);

// # Safety
// `model` must be null or a handle not yet freed.
void gosvm_model_free(struct GosvmModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GOSVM_H */
