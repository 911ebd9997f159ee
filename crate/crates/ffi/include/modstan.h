#ifndef MODSTAN_H
#define MODSTAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum ModstanStatus {
  MODSTAN_STATUS_OK = 0,
  // A required pointer argument was null.
  MODSTAN_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  MODSTAN_STATUS_INVALID_UTF8 = 2,
  // The source did not parse or failed its checks.
  MODSTAN_STATUS_DIAGNOSTICS = 3,
  // The selection was malformed or not a valid selection.
  MODSTAN_STATUS_INVALID_SELECTION = 4,
  // The model graph has more nodes than the cap.
  MODSTAN_STATUS_TOO_LARGE = 5,
  // Any other query failure.
  MODSTAN_STATUS_QUERY_FAILED = 6,
  // A bug inside the library; the handle should be discarded.
  MODSTAN_STATUS_PANIC = 7,
} ModstanStatus;

// A compiled modular program.
typedef struct ModstanProgram ModstanProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string.
const char *modstan_version(void);

// JSON describing the last failure on this thread, or null. Owned by the
// library; valid until the next call on this thread.
const char *modstan_last_error(void);

// Compile `source` into `*out`. On `Diagnostics`, the last error is the
// JSON array of diagnostics.
//
// # Safety
// `source` must be null or a NUL-terminated string; `out` must be null or
// valid for writes.
enum ModstanStatus modstan_compile(const char *source, struct ModstanProgram **out);

// Release a program. Null is ignored.
//
// # Safety
// `program` must be null or a handle from [`modstan_compile`] not yet freed.
void modstan_program_free(struct ModstanProgram *program);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void modstan_string_free(char *s);

// Number of models as a decimal or `2^n` string.
//
// # Safety
// `program` must be a live handle; `out` must be valid for writes.
enum ModstanStatus modstan_model_count(const struct ModstanProgram *program,
                                       uintptr_t cap,
                                       char **out);

// The model graph as JSON, refused with `TooLarge` above `cap` nodes.
// A nonzero `nodes_only` leaves the edge list empty.
//
// # Safety
// `program` must be a live handle; `out` must be valid for writes.
enum ModstanStatus modstan_model_graph(const struct ModstanProgram *program,
                                       uintptr_t cap,
                                       int nodes_only,
                                       char **out);

// The module graph as JSON.
//
// # Safety
// `program` must be a live handle; `out` must be valid for writes.
enum ModstanStatus modstan_module_graph(const struct ModstanProgram *program, char **out);

// The concrete Stan program for a full selection such as
// `"Mean:normal,Stddev:standard"`.
//
// # Safety
// `program` must be a live handle; `selection` a NUL-terminated string;
// `out` valid for writes.
enum ModstanStatus modstan_concretize(const struct ModstanProgram *program,
                                      const char *selection,
                                      char **out);

// Concretize or describe a partial selection: the JSON the service returns
// for `POST /concretize`, with violations and compatible models.
//
// # Safety
// `program` must be a live handle; `selection` a NUL-terminated string;
// `out` valid for writes.
enum ModstanStatus modstan_describe_selection(const struct ModstanProgram *program,
                                              const char *selection,
                                              uintptr_t cap,
                                              char **out);

// Neighbours of a valid selection as JSON.
//
// # Safety
// `program` must be a live handle; `selection` a NUL-terminated string;
// `out` valid for writes.
enum ModstanStatus modstan_neighbors(const struct ModstanProgram *program,
                                     const char *selection,
                                     char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODSTAN_H */
