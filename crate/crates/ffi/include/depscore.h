#ifndef DEPSCORE_H
#define DEPSCORE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsCheckCategory {
  DS_CHECK_CATEGORY_BUILD = 0,
  DS_CHECK_CATEGORY_TEST = 1,
  DS_CHECK_CATEGORY_USELESS = 2,
  DS_CHECK_CATEGORY_LINT = 3,
  DS_CHECK_CATEGORY_DEPLOY = 4,
  DS_CHECK_CATEGORY_SECURITY_ANALYSIS = 5,
  DS_CHECK_CATEGORY_UNCLASSIFIED = 6,
} DsCheckCategory;

typedef enum DsRangeLevel {
  DS_RANGE_LEVEL_EXACT = 0,
  DS_RANGE_LEVEL_PATCH = 1,
  DS_RANGE_LEVEL_MINOR = 2,
  DS_RANGE_LEVEL_MAJOR = 3,
} DsRangeLevel;

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_UTF8 = 2,
  DS_STATUS_IO = 3,
  DS_STATUS_PARSE = 4,
  DS_STATUS_NOT_FOUND = 5,
  DS_STATUS_DOMAIN = 6,
  DS_STATUS_PANIC = 7,
} DsStatus;

/**
 * Opaque 3-tuple dataset.
 */
typedef struct DsDataset DsDataset;

/**
 * 90% interval. `precision` is the unclamped half-width.
 */
typedef struct DsInterval {
  double lo;
  double hi;
  double precision;
} DsInterval;

/**
 * Flattened score report. `score`, `percent` and `interval` are meaningful
 * only when `has_score` is true.
 */
typedef struct DsScoreReport {
  uint64_t candidate_updates;
  uint64_t successful_updates;
  bool has_score;
  double score;
  /**
   * Half-up rounded percentage.
   */
  uint32_t percent;
  bool badge_shown;
  struct DsInterval interval;
  size_t matched_records;
  size_t excluded_unparseable;
} DsScoreReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *ds_last_error_message(void);

/**
 * Build a dataset from a newline-delimited event log. `*out` is set to NULL
 * on failure.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
 */
enum DsStatus ds_dataset_from_events_file(const char *path, struct DsDataset **out);

/**
 * Build a dataset from a snapshot file; duplicate keys keep the latest record.
 *
 * # Safety
 * As for [`ds_dataset_from_events_file`].
 */
enum DsStatus ds_dataset_from_snapshots_file(const char *path, struct DsDataset **out);

/**
 * # Safety
 * `dataset` must be NULL or a handle from this library not yet freed.
 */
void ds_dataset_free(struct DsDataset *dataset);

/**
 * Number of keys; 0 for NULL.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
size_t ds_dataset_len(const struct DsDataset *dataset);

/**
 * Records rejected while loading; 0 for NULL.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
size_t ds_dataset_rejected(const struct DsDataset *dataset);

/**
 * Score an update. At `DS_RANGE_LEVEL_EXACT` `origin` is required and an
 * absent tuple gives `DS_STATUS_NOT_FOUND`; at range levels `origin` is
 * ignored and may be NULL.
 *
 * # Safety
 * Strings must be NULL or NUL-terminated; `dataset` a live handle; `out` writable.
 */
enum DsStatus ds_score(const struct DsDataset *dataset,
                       const char *provider,
                       const char *ecosystem,
                       const char *origin,
                       const char *target,
                       enum DsRangeLevel level,
                       struct DsScoreReport *out);

/**
 * Interval for `successes` out of `candidates` (candidates >= 1).
 *
 * # Safety
 * `out` must be NULL or writable.
 */
enum DsStatus ds_confidence_interval(uint64_t candidates,
                                     uint64_t successes,
                                     struct DsInterval *out);

/**
 * Unclamped interval half-width; defined for `candidates == 0` too.
 *
 * # Safety
 * `out` must be NULL or writable.
 */
enum DsStatus ds_ci_precision(uint64_t candidates, uint64_t successes, double *out);

/**
 * # Safety
 * `name` must be NULL or NUL-terminated; `out` NULL or writable.
 */
enum DsStatus ds_classify_check(const char *name, enum DsCheckCategory *out);

/**
 * Whether `origin` falls in the `level` bucket of `target`. Unparseable
 * versions give `DS_STATUS_PARSE`.
 *
 * # Safety
 * Strings must be NULL or NUL-terminated; `out` NULL or writable.
 */
enum DsStatus ds_version_in_origin_range(const char *origin,
                                         const char *target,
                                         enum DsRangeLevel level,
                                         bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEPSCORE_H */
