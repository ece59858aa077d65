#ifndef DATALOOP_H
#define DATALOOP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum DlStatus {
  DL_STATUS_OK = 0,
  DL_STATUS_NULL_ARGUMENT = 1,
  DL_STATUS_INVALID_UTF8 = 2,
  DL_STATUS_NOT_FOUND = 3,
  DL_STATUS_CONFLICT = 4,
  DL_STATUS_PRECONDITION = 5,
  DL_STATUS_DOMAIN = 6,
  DL_STATUS_DIMENSION = 7,
  DL_STATUS_DEGENERATE_VECTOR = 8,
  DL_STATUS_INGEST = 9,
  DL_STATUS_EMBED = 10,
  DL_STATUS_IO = 11,
  DL_STATUS_INTERNAL = 12,
  DL_STATUS_PANIC = 13,
} DlStatus;

// Run mode for [`dl_run_ablation`].
typedef enum DlAblationMode {
  DL_ABLATION_MODE_PROGRAMMER_ONLY = 0,
  DL_ABLATION_MODE_PROGRAMMER_PLUS_INSPECTOR = 1,
} DlAblationMode;

// A knowledge base with a hashing embedder.
typedef struct DlKnowledgeBase DlKnowledgeBase;

// A dataset profile.
typedef struct DlProfile DlProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static string; do not free.
const char *dl_version(void);

// Message for the last failed call on this thread, or NULL. Valid until
// the next call on the same thread; do not free.
const char *dl_last_error(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void dl_string_free(char *s);

// Profiles a CSV file.
//
// # Safety
// `path` is a NUL-terminated string; `out` is a valid pointer.
enum DlStatus dl_profile_open(const char *path, struct DlProfile **out);

// Profiles CSV bytes held in memory. `name` labels the dataset.
//
// # Safety
// `name` is a NUL-terminated string; `data` points to `len` bytes.
enum DlStatus dl_profile_from_bytes(const char *name,
                                    const uint8_t *data,
                                    size_t len,
                                    struct DlProfile **out);

// # Safety
// `p` is a handle from this library or NULL.
size_t dl_profile_n_rows(const struct DlProfile *p);

// # Safety
// `p` is a handle from this library or NULL.
size_t dl_profile_n_cols(const struct DlProfile *p);

// The profile as JSON.
//
// # Safety
// `p` is a valid handle; `out` is a valid pointer.
enum DlStatus dl_profile_to_json(const struct DlProfile *p, char **out);

// The profile as the plain-text block used in prompts.
//
// # Safety
// `p` is a valid handle; `out` is a valid pointer.
enum DlStatus dl_profile_render_text(const struct DlProfile *p, char **out);

// # Safety
// `p` is a handle from this library (or NULL) and is not used afterwards.
void dl_profile_free(struct DlProfile *p);

// Opens (creating if needed) a knowledge directory.
//
// # Safety
// `dir` is a NUL-terminated string; `out` is a valid pointer.
enum DlStatus dl_kb_open(const char *dir, struct DlKnowledgeBase **out);

// A knowledge base that lives only in memory.
//
// # Safety
// `out` is a valid pointer.
enum DlStatus dl_kb_new_in_memory(struct DlKnowledgeBase **out);

// Adds an entry and returns its id.
//
// # Safety
// `kb` is a valid handle; strings are NUL-terminated; `out_id` is valid.
enum DlStatus dl_kb_add(const struct DlKnowledgeBase *kb,
                        const char *description,
                        const char *code,
                        char **out_id);

// # Safety
// `kb` is a valid handle; `id` is NUL-terminated.
enum DlStatus dl_kb_remove(const struct DlKnowledgeBase *kb, const char *id);

// # Safety
// `kb` is a handle from this library or NULL.
size_t dl_kb_len(const struct DlKnowledgeBase *kb);

// All entries as a JSON array.
//
// # Safety
// `kb` is a valid handle; `out` is a valid pointer.
enum DlStatus dl_kb_list_json(const struct DlKnowledgeBase *kb, char **out);

// Matches an instruction; the JSON result holds `matched` (or null) and
// `all_scores`. A NaN `theta` selects the default threshold.
//
// # Safety
// `kb` is a valid handle; `instruction` is NUL-terminated; `out` is valid.
enum DlStatus dl_kb_match(const struct DlKnowledgeBase *kb,
                          const char *instruction,
                          double theta,
                          char **out_json);

// # Safety
// `kb` is a handle from this library (or NULL) and is not used afterwards.
void dl_kb_free(struct DlKnowledgeBase *kb);

// # Safety
// `a` and `b` point to `len` doubles; `out` is valid.
enum DlStatus dl_cosine_similarity(const double *a, const double *b, size_t len, double *out);

// # Safety
// `out` is valid.
enum DlStatus dl_accuracy(uint64_t tp, uint64_t tn, uint64_t fp, uint64_t fn_, double *out);

// # Safety
// `y` points to `len_y` doubles, `y_hat` to `len_hat`; `out` is valid.
enum DlStatus dl_mse(const double *y,
                     size_t len_y,
                     const double *y_hat,
                     size_t len_hat,
                     double *out);

// # Safety
// `out` is valid.
enum DlStatus dl_estimate_api_capacity(uint64_t context_tokens,
                                       uint64_t reserved_tokens,
                                       uint64_t avg_api_tokens,
                                       uint64_t *out);

// Approximate token count of a string.
//
// # Safety
// `text` is NUL-terminated; `out` is valid.
enum DlStatus dl_count_tokens(const char *text, size_t *out);

// Seeded pass-rate simulation; writes the number of passing instructions.
//
// # Safety
// `out_passed` is valid.
enum DlStatus dl_run_ablation(size_t n_instructions,
                              double first_attempt_success_rate,
                              double repair_success_rate,
                              uint64_t seed,
                              enum DlAblationMode mode,
                              uint32_t max_attempts,
                              size_t *out_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DATALOOP_H */
