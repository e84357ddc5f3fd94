#ifndef HIVQE_H
#define HIVQE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Status code returned by every function.
typedef enum HivqeStatus {
  HIVQE_STATUS_OK = 0,
  HIVQE_STATUS_NULL_POINTER = 1,
  HIVQE_STATUS_INVALID_UTF8 = 2,
  HIVQE_STATUS_PARSE = 3,
  HIVQE_STATUS_IO = 4,
  HIVQE_STATUS_CONFIG = 5,
  HIVQE_STATUS_SECTOR_TOO_LARGE = 6,
  HIVQE_STATUS_NOT_CONVERGED = 7,
  HIVQE_STATUS_NO_VALID_SAMPLES = 8,
  HIVQE_STATUS_INTERNAL = 9,
  HIVQE_STATUS_PANIC = 10,
} HivqeStatus;

// Outcome of a finished run.
typedef enum HivqeRunStatus {
  HIVQE_RUN_STATUS_CONVERGED = 0,
  HIVQE_RUN_STATUS_STALLED = 1,
  HIVQE_RUN_STATUS_MAX_ITERATIONS = 2,
} HivqeRunStatus;

// Parsed one- and two-electron integrals.
typedef struct HivqeIntegrals HivqeIntegrals;

// Result of `hivqe_run`.
typedef struct HivqeRunResult HivqeRunResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *hivqe_last_error_message(void);

// Frees a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void hivqe_string_free(char *s);

// Parses FCIDUMP text.
//
// # Safety
// `text` must be a NUL-terminated string; `out_handle` a valid pointer.
enum HivqeStatus hivqe_integrals_parse(const char *text, struct HivqeIntegrals **out_handle);

// Loads an FCIDUMP file.
//
// # Safety
// `path` must be a NUL-terminated string; `out_handle` a valid pointer.
enum HivqeStatus hivqe_integrals_load(const char *path, struct HivqeIntegrals **out_handle);

// Frees integrals. NULL is ignored.
//
// # Safety
// `h` must come from `hivqe_integrals_parse`/`_load` and not have been freed.
void hivqe_integrals_free(struct HivqeIntegrals *h);

// Orbital and electron counts.
//
// # Safety
// All pointers must be valid.
enum HivqeStatus hivqe_integrals_shape(const struct HivqeIntegrals *h,
                                       size_t *n_orb,
                                       size_t *n_alpha,
                                       size_t *n_beta);

// Hartree-Fock energy including the core term.
//
// # Safety
// All pointers must be valid.
enum HivqeStatus hivqe_hartree_fock_energy(const struct HivqeIntegrals *h, double *energy);

// Exact ground-state energy over the full sector; fails with
// `SECTOR_TOO_LARGE` above `limit` determinants (0 selects the default).
//
// # Safety
// All pointers must be valid.
enum HivqeStatus hivqe_fci_energy(const struct HivqeIntegrals *h, size_t limit, double *energy);

// Sector size as a decimal string (free with `hivqe_string_free`).
//
// # Safety
// All pointers must be valid.
enum HivqeStatus hivqe_sector_size(const struct HivqeIntegrals *h, char **size);

// Runs the full iteration. `config_json` is a flat JSON object of run
// settings, or NULL for defaults.
//
// # Safety
// `h` must be valid, `config_json` NULL or NUL-terminated, `out_handle` valid.
enum HivqeStatus hivqe_run(const struct HivqeIntegrals *h,
                           const char *config_json,
                           struct HivqeRunResult **out_handle);

// Frees a run result. NULL is ignored.
//
// # Safety
// `r` must come from `hivqe_run` and not have been freed.
void hivqe_result_free(struct HivqeRunResult *r);

// Lowest energy found (Hartree).
//
// # Safety
// All pointers must be valid.
enum HivqeStatus hivqe_result_energy(const struct HivqeRunResult *r, double *energy);

// Number of determinants in the final subspace.
//
// # Safety
// All pointers must be valid.
enum HivqeStatus hivqe_result_n_dets(const struct HivqeRunResult *r, size_t *n_dets);

// How the run terminated.
//
// # Safety
// All pointers must be valid.
enum HivqeStatus hivqe_result_status(const struct HivqeRunResult *r, enum HivqeRunStatus *status);

// The result document as JSON (free with `hivqe_string_free`).
//
// # Safety
// All pointers must be valid.
enum HivqeStatus hivqe_result_to_json(const struct HivqeRunResult *r, char **json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HIVQE_H */
