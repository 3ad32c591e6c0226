/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef EMKIT_H
#define EMKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EmkitStatus {
  EMKIT_STATUS_OK = 0,
  EMKIT_STATUS_NULL_POINTER = 1,
  EMKIT_STATUS_INVALID_UTF8 = 2,
  EMKIT_STATUS_INVALID_ARGUMENT = 3,
  EMKIT_STATUS_IO = 4,
  EMKIT_STATUS_PROVIDER = 5,
  EMKIT_STATUS_INTERNAL = 6,
} EmkitStatus;

// An exact dense index over chunk vectors.
typedef struct EmkitDenseIndex EmkitDenseIndex;

// A text embedder.
typedef struct EmkitEmbedder EmkitEmbedder;

// One ranked result list with NUL-terminated copies of the chunk ids.
typedef struct EmkitRankedList EmkitRankedList;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL if none.
// The pointer stays valid until the next failing call on the same thread.
const char *emkit_last_error_message(void);

// Library version as a static string.
const char *emkit_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be NULL or a pointer previously returned by this library and not
// yet freed.
void emkit_string_free(char *s);

// Creates the deterministic offline embedder.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum EmkitStatus emkit_embedder_stub_new(uint64_t seed, size_t dims, struct EmkitEmbedder **out);

// Creates an embedder that POSTs to `{base_url}/embed`. `model` may be NULL.
// `timeout_ms` of 0 keeps the default timeout.
//
// # Safety
// String arguments must be NULL or valid NUL-terminated strings; `out` must
// be writable.
enum EmkitStatus emkit_embedder_http_new(const char *base_url,
                                         const char *model,
                                         size_t batch_size,
                                         uint64_t timeout_ms,
                                         struct EmkitEmbedder **out);

// Vector width of the embedder, or 0 for NULL.
//
// # Safety
// `embedder` must be NULL or a live handle.
size_t emkit_embedder_dims(const struct EmkitEmbedder *embedder);

// # Safety
// `embedder` must be NULL or a live handle, not used afterwards.
void emkit_embedder_free(struct EmkitEmbedder *embedder);

// Embeds every chunk of a chunks JSONL file into a new index.
//
// # Safety
// `chunks_path` must be a valid string, `embedder` a live handle and `out`
// writable.
enum EmkitStatus emkit_dense_index_build(const char *chunks_path,
                                         const struct EmkitEmbedder *embedder,
                                         struct EmkitDenseIndex **out);

// Loads an index written by [`emkit_dense_index_save`] or `emkit index build`.
//
// # Safety
// `path` must be a valid string and `out` writable.
enum EmkitStatus emkit_dense_index_load(const char *path, struct EmkitDenseIndex **out);

// # Safety
// `index` must be a live handle and `path` a valid string.
enum EmkitStatus emkit_dense_index_save(const struct EmkitDenseIndex *index, const char *path);

// Number of indexed chunks, or 0 for NULL.
//
// # Safety
// `index` must be NULL or a live handle.
size_t emkit_dense_index_len(const struct EmkitDenseIndex *index);

// # Safety
// `index` must be NULL or a live handle, not used afterwards.
void emkit_dense_index_free(struct EmkitDenseIndex *index);

// Exact top-`k` cosine search. Ties are broken by ascending chunk id.
//
// # Safety
// Handles must be live, `query` a valid string and `out` writable.
enum EmkitStatus emkit_dense_search(const struct EmkitDenseIndex *index,
                                    const struct EmkitEmbedder *embedder,
                                    const char *query,
                                    size_t k,
                                    struct EmkitRankedList **out);

// Number of results, or 0 for NULL.
//
// # Safety
// `list` must be NULL or a live handle.
size_t emkit_ranked_list_len(const struct EmkitRankedList *list);

// Reads result `i` (0 = best). `chunk_id` borrows from the list and stays
// valid until the list is freed. Either out-pointer may be NULL.
//
// # Safety
// `list` must be a live handle; non-NULL out-pointers must be writable.
enum EmkitStatus emkit_ranked_list_get(const struct EmkitRankedList *list,
                                       size_t i,
                                       const char **chunk_id,
                                       double *score);

// # Safety
// `list` must be NULL or a live handle, not used afterwards.
void emkit_ranked_list_free(struct EmkitRankedList *list);

// Chunks `text` and writes the chunks as a JSON array.
//
// # Safety
// `doc_id` and `text` must be valid strings and `out_json` writable. Free
// the result with [`emkit_string_free`].
enum EmkitStatus emkit_chunk_text_json(const char *doc_id,
                                       const char *text,
                                       size_t max_tokens,
                                       size_t overlap_tokens,
                                       char **out_json);

// Masks PII in `text`; the output has the same byte length as the input.
// `names` is an array of `n_names` dictionary surfaces and may be NULL when
// `n_names` is 0. `n_spans`, when non-NULL, receives the number of masked spans.
//
// # Safety
// Strings must be valid, `names` must hold `n_names` valid strings and
// `out_masked` must be writable. Free the result with [`emkit_string_free`].
enum EmkitStatus emkit_mask_pii(const char *text,
                                const char *const *names,
                                size_t n_names,
                                char **out_masked,
                                size_t *n_spans);

// MaxSim of two row-major multivectors: for each query row, the best dot
// product against any document row, summed. Inputs are used as given.
//
// # Safety
// `q` must hold `q_tokens * dims` floats and `d` `d_tokens * dims` floats;
// `out` must be writable.
enum EmkitStatus emkit_maxsim(const float *q,
                              size_t q_tokens,
                              const float *d,
                              size_t d_tokens,
                              size_t dims,
                              double *out);

// Scores a six-column TREC run file against a qrels file (three or four
// columns) at the given cutoffs and writes the metric table as JSON.
//
// # Safety
// Paths must be valid strings, `ks` must hold `n_ks` values and `out_json`
// must be writable. Free the result with [`emkit_string_free`].
enum EmkitStatus emkit_evaluate_trec(const char *run_path,
                                     const char *qrels_path,
                                     const size_t *ks,
                                     size_t n_ks,
                                     char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMKIT_H */
