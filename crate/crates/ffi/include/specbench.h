#ifndef SPECBENCH_H
#define SPECBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_UTF8 = 2,
  SB_STATUS_PARSE = 3,
  SB_STATUS_IO = 4,
  SB_STATUS_INVALID = 5,
  SB_STATUS_CAPACITY = 6,
  SB_STATUS_PANIC = 7,
} SbStatus;

typedef enum SbAlternative {
  SB_ALTERNATIVE_A_GREATER = 0,
  SB_ALTERNATIVE_B_GREATER = 1,
} SbAlternative;

/**
 * Opaque search index. Keeps its own copy of the library.
 */
typedef struct SbIndex SbIndex;

/**
 * Opaque reference library.
 */
typedef struct SbLibrary SbLibrary;

/**
 * Opaque batch of search results.
 */
typedef struct SbResults SbResults;

typedef struct SbHit {
  double score;
  /**
   * Owned by the results handle; valid until it is freed.
   */
  const char *analyte_key;
} SbHit;

typedef struct SbTallyMetrics {
  double precision;
  double true_hit_rate;
  double f1;
  bool degenerate;
} SbTallyMetrics;

typedef struct SbWelchResult {
  double t;
  double dof;
  double p;
} SbWelchResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a
 * success. Valid until the next call on the same thread.
 */
const char *sb_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sb_version(void);

/**
 * Loads a JSONL library manifest from `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a writable pointer.
 */
enum SbStatus sb_library_load_manifest(const char *path, struct SbLibrary **out);

/**
 * Parses a JSONL library manifest held in memory.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` a writable pointer.
 */
enum SbStatus sb_library_parse_manifest(const uint8_t *data, size_t len, struct SbLibrary **out);

/**
 * # Safety
 * `lib` must be null or a handle from this library, not yet freed.
 */
size_t sb_library_n_analytes(const struct SbLibrary *lib);

/**
 * # Safety
 * `lib` must be null or a handle from this library, not yet freed.
 */
size_t sb_library_n_spectra(const struct SbLibrary *lib);

/**
 * # Safety
 * `lib` must be null or a handle not yet freed.
 */
void sb_library_free(struct SbLibrary *lib);

/**
 * Builds a modified-cosine index. `fragment_tol` is in Th.
 *
 * # Safety
 * `lib` must be a live library handle; `out` a writable pointer.
 */
enum SbStatus sb_index_build(const struct SbLibrary *lib,
                             double ppm_tol,
                             size_t top_k,
                             double fragment_tol,
                             struct SbIndex **out);

/**
 * # Safety
 * `index` must be null or a handle not yet freed.
 */
void sb_index_free(struct SbIndex *index);

/**
 * Searches every spectrum of an in-memory MGF document. Queries that
 * cannot be scored yield no hits and are flagged as failed.
 *
 * # Safety
 * `index` must be a live handle; `mgf` must point to `len` readable bytes;
 * `out` a writable pointer.
 */
enum SbStatus sb_index_search_mgf(const struct SbIndex *index,
                                  const uint8_t *mgf,
                                  size_t len,
                                  struct SbResults **out);

/**
 * # Safety
 * `res` must be null or a live results handle.
 */
size_t sb_results_query_count(const struct SbResults *res);

/**
 * Query id, or null when out of range. Owned by `res`.
 *
 * # Safety
 * `res` must be null or a live results handle.
 */
const char *sb_results_query_id(const struct SbResults *res, size_t query);

/**
 * # Safety
 * `res` must be null or a live results handle.
 */
bool sb_results_query_failed(const struct SbResults *res, size_t query);

/**
 * # Safety
 * `res` must be null or a live results handle.
 */
size_t sb_results_hit_count(const struct SbResults *res, size_t query);

/**
 * Hit at zero-based `rank` of `query`.
 *
 * # Safety
 * `res` must be a live results handle; `out` a writable pointer.
 */
enum SbStatus sb_results_hit(const struct SbResults *res,
                             size_t query,
                             size_t rank,
                             struct SbHit *out);

/**
 * # Safety
 * `res` must be null or a handle not yet freed.
 */
void sb_results_free(struct SbResults *res);

/**
 * Modified cosine between two spectra given as parallel m/z and
 * intensity arrays. `fragment_tol` is in Th.
 *
 * # Safety
 * Each array must hold its stated number of values; outputs must be
 * writable (`matched_out` may be null).
 */
enum SbStatus sb_modified_cosine(double precursor_a,
                                 const double *mz_a,
                                 const double *intensity_a,
                                 size_t n_a,
                                 double precursor_b,
                                 const double *mz_b,
                                 const double *intensity_b,
                                 size_t n_b,
                                 double fragment_tol,
                                 double *score_out,
                                 size_t *matched_out);

/**
 * MCES distance between two SMILES. Above `threshold` the distance is a
 * lower bound and `exact_out` is false.
 *
 * # Safety
 * Strings must be NUL-terminated; outputs writable (`exact_out` may be
 * null).
 */
enum SbStatus sb_mces_distance(const char *smiles_a,
                               const char *smiles_b,
                               size_t threshold,
                               size_t *distance_out,
                               bool *exact_out);

/**
 * # Safety
 * `out` must be writable.
 */
enum SbStatus sb_tally_metrics(size_t tp, size_t fp, size_t detectable, struct SbTallyMetrics *out);

/**
 * AUC of scores with nonzero `labels` marking positives.
 *
 * # Safety
 * `scores` and `labels` must hold `n` values; `auc_out` writable.
 */
enum SbStatus sb_roc_auc(const double *scores, const uint8_t *labels, size_t n, double *auc_out);

/**
 * One-tailed Welch test.
 *
 * # Safety
 * `a` and `b` must hold `n_a` and `n_b` values; `out` writable.
 */
enum SbStatus sb_welch_t_test(const double *a,
                              size_t n_a,
                              const double *b,
                              size_t n_b,
                              enum SbAlternative alternative,
                              struct SbWelchResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECBENCH_H */
