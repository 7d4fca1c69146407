#ifndef MDCS_H
#define MDCS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MdcsStatus {
  MDCS_STATUS_OK = 0,
  MDCS_STATUS_INVALID_ARGUMENT = 1,
  MDCS_STATUS_DIMENSION = 2,
  MDCS_STATUS_CONFIG = 3,
  MDCS_STATUS_NUMERIC = 4,
  MDCS_STATUS_FORMAT = 5,
  MDCS_STATUS_IO = 6,
  MDCS_STATUS_NULL_POINTER = 7,
  MDCS_STATUS_PANIC = 8,
} MdcsStatus;

/**
 * Run configuration.
 */
typedef struct MdcsConfig MdcsConfig;

/**
 * Labeled dataset.
 */
typedef struct MdcsDataset MdcsDataset;

/**
 * Trained multi-expert model, with its optimizer state if it came from
 * training or a checkpoint that stored one.
 */
typedef struct MdcsModel MdcsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *mdcs_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void mdcs_string_free(char *s);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MdcsStatus mdcs_config_default(struct MdcsConfig **out);

/**
 * Parses flat `key = value` config text.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` a valid pointer.
 */
enum MdcsStatus mdcs_config_parse(const char *text, struct MdcsConfig **out);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum MdcsStatus mdcs_config_set_seed(struct MdcsConfig *cfg, uint64_t seed);

/**
 * Resolved config in canonical `key = value` form.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a valid pointer.
 */
enum MdcsStatus mdcs_config_echo(const struct MdcsConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be null or a handle from this library, not yet freed.
 */
void mdcs_config_free(struct MdcsConfig *cfg);

/**
 * Loads a dataset CSV.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum MdcsStatus mdcs_dataset_load(const char *path, struct MdcsDataset **out);

/**
 * # Safety
 * `ds` must be a live dataset handle and `path` a nul-terminated string.
 */
enum MdcsStatus mdcs_dataset_save(const struct MdcsDataset *ds, const char *path);

/**
 * Builds the train and test sets a config describes.
 *
 * # Safety
 * `cfg` must be a live config handle; `train` and `test` valid pointers.
 */
enum MdcsStatus mdcs_dataset_prepare(const struct MdcsConfig *cfg,
                                     struct MdcsDataset **train_out,
                                     struct MdcsDataset **test_out);

/**
 * Number of instances; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
uintptr_t mdcs_dataset_len(const struct MdcsDataset *ds);

/**
 * Feature dimension; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
uintptr_t mdcs_dataset_dim(const struct MdcsDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle from this library, not yet freed.
 */
void mdcs_dataset_free(struct MdcsDataset *ds);

/**
 * Trains a model on `train` with the given config.
 *
 * # Safety
 * `cfg` and `train` must be live handles and `out` a valid pointer.
 */
enum MdcsStatus mdcs_train(const struct MdcsConfig *cfg,
                           const struct MdcsDataset *train_set,
                           struct MdcsModel **out);

/**
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum MdcsStatus mdcs_model_load(const char *path, struct MdcsModel **out);

/**
 * # Safety
 * `model` must be a live model handle and `path` a nul-terminated string.
 */
enum MdcsStatus mdcs_model_save(const struct MdcsModel *model, const char *path);

/**
 * # Safety
 * `model` must be null or a live model handle.
 */
uintptr_t mdcs_model_num_experts(const struct MdcsModel *model);

/**
 * # Safety
 * `model` must be null or a live model handle.
 */
uintptr_t mdcs_model_num_classes(const struct MdcsModel *model);

/**
 * # Safety
 * `model` must be null or a live model handle.
 */
uintptr_t mdcs_model_input_dim(const struct MdcsModel *model);

/**
 * Raw logits for `rows` row-major inputs of width `cols`. `out` receives
 * `experts * rows * classes` values laid out expert-major, then row, then
 * class; `out_len` must be exactly that.
 *
 * # Safety
 * `inputs` must point to `rows * cols` doubles and `out` to `out_len`.
 */
enum MdcsStatus mdcs_model_predict(const struct MdcsModel *model,
                                   const double *inputs,
                                   uintptr_t rows,
                                   uintptr_t cols,
                                   double *out,
                                   uintptr_t out_len);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void mdcs_model_free(struct MdcsModel *model);

/**
 * Diversity softmax of one logit vector: `softmax(v / T + lambda * ln n)`.
 *
 * # Safety
 * `logits` and `out` must point to `classes` doubles, `counts` to
 * `classes` counts.
 */
enum MdcsStatus mdcs_diversity_softmax(const double *logits,
                                       const uintptr_t *counts,
                                       uintptr_t classes,
                                       double lambda,
                                       double temperature,
                                       double *out);

/**
 * Evaluates `model` on `test`, with shot groups taken from the class
 * counts of `train`, and returns the report as JSON.
 *
 * # Safety
 * All handles must be live and `out` a valid pointer.
 */
enum MdcsStatus mdcs_evaluate_json(const struct MdcsModel *model,
                                   const struct MdcsConfig *cfg,
                                   const struct MdcsDataset *train_set,
                                   const struct MdcsDataset *test_set,
                                   char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDCS_H */
