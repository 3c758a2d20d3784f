#ifndef PROGX_H
#define PROGX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ProgxClass {
  PROGX_CLASS_LINE = 0,
  PROGX_CLASS_CIRCLE = 1,
  PROGX_CLASS_HOMOGRAPHY = 2,
  PROGX_CLASS_PLANE = 3,
  PROGX_CLASS_CYLINDER = 4,
} ProgxClass;

typedef enum ProgxStatus {
  PROGX_STATUS_OK = 0,
  PROGX_STATUS_NULL_POINTER = 1,
  PROGX_STATUS_INVALID_ARGUMENT = 2,
  PROGX_STATUS_DATA_ERROR = 3,
  PROGX_STATUS_OUT_OF_RANGE = 4,
  PROGX_STATUS_BUFFER_TOO_SMALL = 5,
  PROGX_STATUS_PANIC = 6,
} ProgxStatus;

/**
 * Fitting parameters; starts from the library defaults.
 */
typedef struct ProgxConfig ProgxConfig;

/**
 * The outcome of one fit.
 */
typedef struct ProgxResult ProgxResult;

/**
 * A set of data points or correspondences.
 */
typedef struct ProgxScene ProgxScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty after a
 * successful call. Valid until the next call into this library.
 */
const char *progx_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *progx_version(void);

/**
 * Scene of `n` planar points from interleaved `x y` pairs.
 *
 * # Safety
 * `xy` must point to `2 * n` readable doubles.
 */
struct ProgxScene *progx_scene_from_points2(const double *xy, size_t n);

/**
 * Scene of `n` spatial points from interleaved `x y z` triples.
 *
 * # Safety
 * `xyz` must point to `3 * n` readable doubles.
 */
struct ProgxScene *progx_scene_from_points3(const double *xyz, size_t n);

/**
 * Scene of `n` oriented points from interleaved `x y z nx ny nz` rows.
 *
 * # Safety
 * `rows_ptr` must point to `6 * n` readable doubles.
 */
struct ProgxScene *progx_scene_from_oriented_points3(const double *rows_ptr, size_t n);

/**
 * Scene of `n` correspondences from interleaved `x1 y1 x2 y2` rows.
 *
 * # Safety
 * `rows_ptr` must point to `4 * n` readable doubles.
 */
struct ProgxScene *progx_scene_from_correspondences(const double *rows_ptr, size_t n);

/**
 * Loads a scene file; `format` is `"xy"`, `"xyz"` or `"corr"`.
 *
 * # Safety
 * `path` and `format` must be NUL-terminated strings.
 */
struct ProgxScene *progx_scene_load(const char *path, const char *format);

/**
 * Number of points in the scene, 0 for `NULL`.
 *
 * # Safety
 * `scene` must be `NULL` or a live scene handle.
 */
size_t progx_scene_len(const struct ProgxScene *scene);

/**
 * # Safety
 * `scene` must be `NULL` or a handle not yet freed.
 */
void progx_scene_free(struct ProgxScene *scene);

struct ProgxConfig *progx_config_new(void);

/**
 * # Safety
 * `config` must be `NULL` or a handle not yet freed.
 */
void progx_config_free(struct ProgxConfig *config);

/**
 * # Safety
 * `config` must be a live config handle.
 */
enum ProgxStatus progx_config_set_threshold(struct ProgxConfig *config, double value);

/**
 * # Safety
 * `config` must be a live config handle.
 */
enum ProgxStatus progx_config_set_confidence(struct ProgxConfig *config, double value);

/**
 * # Safety
 * `config` must be a live config handle.
 */
enum ProgxStatus progx_config_set_jaccard_epsilon(struct ProgxConfig *config, double value);

/**
 * # Safety
 * `config` must be a live config handle.
 */
enum ProgxStatus progx_config_set_spatial_weight(struct ProgxConfig *config, double value);

/**
 * # Safety
 * `config` must be a live config handle.
 */
enum ProgxStatus progx_config_set_label_cost(struct ProgxConfig *config, double value);

/**
 * Minimum instance support; 0 restores the per-class default `m + 1`.
 *
 * # Safety
 * `config` must be a live config handle.
 */
enum ProgxStatus progx_config_set_min_support(struct ProgxConfig *config, size_t value);

/**
 * # Safety
 * `config` must be a live config handle.
 */
enum ProgxStatus progx_config_set_seed(struct ProgxConfig *config, uint64_t value);

/**
 * # Safety
 * `config` must be a live config handle.
 */
enum ProgxStatus progx_config_set_max_proposals(struct ProgxConfig *config, size_t value);

/**
 * Grid neighborhood with the given cell size; 0 restores the default grid.
 *
 * # Safety
 * `config` must be a live config handle.
 */
enum ProgxStatus progx_config_set_grid_cell(struct ProgxConfig *config, double cell_size);

/**
 * Symmetrized k-nearest-neighbor graph instead of a grid.
 *
 * # Safety
 * `config` must be a live config handle.
 */
enum ProgxStatus progx_config_set_knn(struct ProgxConfig *config, size_t k);

/**
 * Classes proposed in round-robin order.
 *
 * # Safety
 * `config` must be a live config handle and `classes` must point to `n` values.
 */
enum ProgxStatus progx_config_set_classes(struct ProgxConfig *config,
                                          const enum ProgxClass *classes,
                                          size_t n);

/**
 * Fits the scene; on success `*out` receives a new result handle.
 *
 * # Safety
 * `scene` and `config` must be live handles and `out` a writable pointer.
 */
enum ProgxStatus progx_fit(const struct ProgxScene *scene,
                           const struct ProgxConfig *config,
                           struct ProgxResult **out);

/**
 * # Safety
 * `result` must be `NULL` or a handle not yet freed.
 */
void progx_result_free(struct ProgxResult *result);

/**
 * Number of fitted instances, 0 for `NULL`.
 *
 * # Safety
 * `result` must be `NULL` or a live result handle.
 */
size_t progx_result_instance_count(const struct ProgxResult *result);

/**
 * Class and parameters of instance `index`. `*len` receives the parameter
 * count; `params` may be `NULL` to query it.
 *
 * # Safety
 * `result` must be live; `class_out` and `len` writable; `params` `NULL` or
 * writable for `capacity` doubles.
 */
enum ProgxStatus progx_result_instance(const struct ProgxResult *result,
                                       size_t index,
                                       enum ProgxClass *class_out,
                                       double *params,
                                       size_t capacity,
                                       size_t *len);

/**
 * Copies one label per point: 0 for outliers, `k + 1` for instance `k`.
 *
 * # Safety
 * `result` must be live and `labels` writable for `capacity` values.
 */
enum ProgxStatus progx_result_labels(const struct ProgxResult *result,
                                     size_t *labels,
                                     size_t capacity);

/**
 * Total labeling energy of the result, NaN for `NULL`.
 *
 * # Safety
 * `result` must be `NULL` or a live result handle.
 */
double progx_result_energy(const struct ProgxResult *result);

/**
 * The result document as JSON; release with [`progx_string_free`].
 *
 * # Safety
 * `result` must be a live result handle.
 */
char *progx_result_json(const struct ProgxResult *result);

/**
 * # Safety
 * `s` must be `NULL` or a string returned by this library, not yet freed.
 */
void progx_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROGX_H */
