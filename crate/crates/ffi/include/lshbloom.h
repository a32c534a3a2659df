/* C interface to the lshbloom deduplication index. */

#ifndef LSHBLOOM_H
#define LSHBLOOM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI entry point.
 */
typedef enum LshbStatus {
  LSHB_OK = 0,
  /**
   * A parameter was out of range or inconsistent.
   */
  LSHB_ERR_INVALID_ARG = 1,
  /**
   * The document produced no shingles (empty or whitespace-only text).
   */
  LSHB_ERR_EMPTY_DOCUMENT = 2,
  /**
   * Filesystem failure while saving or loading.
   */
  LSHB_ERR_IO = 3,
  /**
   * The file is not a valid index (bad magic, version, truncation, or
   * checksum mismatch).
   */
  LSHB_ERR_FORMAT = 4,
  /**
   * A required pointer argument was null, or text was not valid UTF-8.
   */
  LSHB_ERR_BAD_POINTER = 5,
} LshbStatus;

/**
 * Opaque deduplication index: the per-band Bloom filters plus the hashing
 * configuration needed to turn raw text into signatures.
 */
typedef struct LshbIndex LshbIndex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the crate version as a static string.
 */
const char *lshb_version(void);

/**
 * Returns the message of the last error on this thread; valid until the
 * next failing call on the same thread.
 */
const char *lshb_last_error_message(void);

/**
 * Predicts the on-disk index size in bytes for a corpus of `n_docs` at
 * effective false-positive rate `p_effective`.
 */
enum LshbStatus lshb_plan_file_bytes(uint64_t n_docs,
                                     double p_effective,
                                     double threshold,
                                     uint32_t num_perm,
                                     uint64_t *out_bytes);

/**
 * Creates an index sized for `capacity` documents. `char_shingles`
 * selects character shingles; zero means word shingles. On success
 * `*out_index` owns the handle.
 */
enum LshbStatus lshb_index_new(double threshold,
                               uint32_t num_perm,
                               uint64_t capacity,
                               double p_effective,
                               uint64_t seed,
                               uint32_t shingle_n,
                               int32_t char_shingles,
                               struct LshbIndex **out_index);

/**
 * Releases a handle. Passing null is a no-op.
 */
void lshb_index_free(struct LshbIndex *index);

/**
 * Inserts a document without querying.
 */
enum LshbStatus lshb_index_insert_text(struct LshbIndex *index, const char *text);

/**
 * Queries a document without inserting; writes 1 to `*out_is_duplicate`
 * if any band already contains it.
 */
enum LshbStatus lshb_index_query_text(const struct LshbIndex *index,
                                      const char *text,
                                      int32_t *out_is_duplicate);

/**
 * Streaming first-seen-wins step: queries, then inserts, in one call.
 */
enum LshbStatus lshb_index_query_insert_text(struct LshbIndex *index,
                                             const char *text,
                                             int32_t *out_is_duplicate);

/**
 * Number of documents inserted so far.
 */
enum LshbStatus lshb_index_doc_count(const struct LshbIndex *index, uint64_t *out_count);

/**
 * Exact size of the file `lshb_index_save` would write.
 */
enum LshbStatus lshb_index_file_bytes(const struct LshbIndex *index, uint64_t *out_bytes);

/**
 * Writes the index to `path` in its checksummed container format.
 */
enum LshbStatus lshb_index_save(const struct LshbIndex *index, const char *path);

/**
 * Loads an index from `path`. The shingle configuration is not stored in
 * the file and must be supplied again.
 */
enum LshbStatus lshb_index_load(const char *path,
                                uint32_t shingle_n,
                                int32_t char_shingles,
                                struct LshbIndex **out_index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSHBLOOM_H */
