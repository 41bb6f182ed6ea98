#ifndef DOCTABLE_H
#define DOCTABLE_H

/* Generated by cbindgen from doctable-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call in this library.
typedef enum DoctableStatus {
  // The call succeeded.
  DOCTABLE_STATUS_OK = 0,
  // A required pointer argument was NULL.
  DOCTABLE_STATUS_NULL_ARGUMENT = 1,
  // An input string was not valid UTF-8.
  DOCTABLE_STATUS_INVALID_UTF8 = 2,
  // An input string was not the expected JSON shape.
  DOCTABLE_STATUS_INVALID_JSON = 3,
  // Inputs parsed but failed validation (shape mismatch, bad tau, ...).
  DOCTABLE_STATUS_INVALID_INPUT = 4,
  // Unexpected internal failure.
  DOCTABLE_STATUS_INTERNAL = 5,
} DoctableStatus;

// Key similarity measure used to align prediction rows to ground truth.
// Pass one of these constants as the `similarity` argument.
typedef enum DoctableSimilarity {
  // Levenshtein distance scaled into [0, 1].
  DOCTABLE_SIMILARITY_NORMALIZED_EDIT = 0,
  // Jaccard overlap of whitespace tokens.
  DOCTABLE_SIMILARITY_TOKEN_JACCARD = 1,
} DoctableSimilarity;

// Opaque evaluation context: a validated schema, ground-truth table, and
// capability matrix ready to score predictions against.
typedef struct DoctableEval DoctableEval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses and validates an evaluation context.
//
// `schema_json` is the attribute schema, `table_json` the ground-truth
// table (`{"rows": [[...]]}` with `null` for missing cells), and
// `matrix_json` the capability matrix whose shape must match the table.
// On success writes a fresh context to `out`; release it with
// `doctable_eval_free`.
enum DoctableStatus doctable_eval_new(const char *schema_json,
                                      const char *table_json,
                                      const char *matrix_json,
                                      struct DoctableEval **out);

// Scores one prediction against the context's ground truth.
//
// `prediction_json` is an array of rows, each an array of cell values with
// `null` for missing cells, in schema column order. `tau` is the minimum
// key similarity for a row match, in [0, 1]. `similarity` is one of the
// `DoctableSimilarity` constants. On success writes a JSON object
// `{"counts": ..., "metrics": ...}` to `out_json`; release it with
// `doctable_string_free`.
enum DoctableStatus doctable_eval_score(const struct DoctableEval *eval,
                                        const char *prediction_json,
                                        double tau,
                                        int similarity,
                                        char **out_json);

// Releases a context created by `doctable_eval_new`. NULL is a no-op.
void doctable_eval_free(struct DoctableEval *eval);

// Normalizes one cell value the same way scoring does: lowercase, collapsed
// whitespace, thousands separators and decorative punctuation removed,
// missing-value spellings mapped to the canonical null token. On success
// writes the normalized string to `out`; release it with
// `doctable_string_free`.
enum DoctableStatus doctable_normalize_cell(const char *value, char **out);

// Returns a copy of the message for the calling thread's most recent
// failure, or NULL if the last call on this thread succeeded. Release the
// copy with `doctable_string_free`.
char *doctable_last_error(void);

// Releases a string returned by this library. NULL is a no-op.
void doctable_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOCTABLE_H */
