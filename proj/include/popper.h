/* C API for the falsification-engine library.
 *
 * Handles are opaque; every function that can fail returns a popper_status
 * and records a message retrievable with popper_last_error() (thread-local,
 * cleared on success). Strings returned by handle accessors are owned by the
 * handle and stay valid until the handle is freed; strings returned through
 * char** out-parameters are heap copies released with popper_string_free().
 */
#ifndef POPPER_H
#define POPPER_H

#include <stddef.h>

#if defined(__GNUC__) || defined(__clang__)
#define POPPER_API __attribute__((visibility("default")))
#else
#define POPPER_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum popper_status {
  POPPER_OK = 0,
  POPPER_INVALID_ARGUMENT = 1,
  POPPER_CONFIG = 2,           /* malformed or out-of-domain configuration */
  POPPER_ABORTED = 3,          /* provider fault; partial results available */
  POPPER_FIXTURE_MISMATCH = 4, /* replay diverged from recorded values */
  POPPER_IO = 5,
  POPPER_INTERNAL = 6
} popper_status;

POPPER_API const char* popper_status_name(popper_status status);
POPPER_API const char* popper_version(void);

/* Thread-local message for the last failed call on this thread; empty string
 * after a successful call. */
POPPER_API const char* popper_last_error(void);

/* e = kappa * p^(kappa-1) after clamping p into [p_floor, 1]. */
POPPER_API popper_status popper_calibrate(double p_raw, double kappa, double p_floor,
                                          double* e_out);

/* Fisher's combined p over `count` p-values in (0, 1]. */
POPPER_API popper_status popper_fisher_combine(const double* ps, size_t count, double* p_out);

/* Multiple-testing selections over final e-values. rejected_out must have
 * capacity for `count` ints; receives 1-based indices sorted ascending. */
POPPER_API popper_status popper_bonferroni(const double* final_es, size_t count, double alpha,
                                           int* rejected_out, size_t* n_rejected_out);
POPPER_API popper_status popper_ebh(const double* final_es, size_t count, double alpha,
                                    int* rejected_out, size_t* n_rejected_out);

/* ------------------------------------------------------------------ runs */

typedef struct popper_run popper_run;

/* Runs one validation described by a config JSON document (see README for
 * the schema). Relative paths inside the config resolve against base_dir
 * (NULL means "."). On POPPER_ABORTED *run_out is still set and carries the
 * partial ledger; on any other failure *run_out is NULL. */
POPPER_API popper_status popper_run_validation_json(const char* config_json,
                                                    const char* base_dir,
                                                    popper_run** run_out);

POPPER_API int popper_run_validated(const popper_run* run);
POPPER_API double popper_run_final_e(const popper_run* run);
POPPER_API int popper_run_stopping_index(const popper_run* run);
POPPER_API double popper_run_alpha(const popper_run* run);
POPPER_API size_t popper_run_ledger_size(const popper_run* run);
POPPER_API int popper_run_aborted(const popper_run* run);
POPPER_API const char* popper_run_abort_reason(const popper_run* run);
POPPER_API const char* popper_run_summary(const popper_run* run);
POPPER_API const char* popper_run_ledger_jsonl(const popper_run* run);
POPPER_API void popper_run_free(popper_run* run);

/* ----------------------------------------------------------- monte carlo */

typedef struct popper_mc popper_mc;

/* Executes a Monte Carlo plan JSON document (simulations and sweeps). */
POPPER_API popper_status popper_mc_run_json(const char* plan_json, const char* base_dir,
                                            popper_mc** mc_out);

POPPER_API const char* popper_mc_csv(const popper_mc* mc);
POPPER_API const char* popper_mc_report_json(const popper_mc* mc);
/* Newline-separated assertion lines (TYPE-I, POWER, ...). */
POPPER_API const char* popper_mc_assertions(const popper_mc* mc);
POPPER_API int popper_mc_all_assertions_passed(const popper_mc* mc);
POPPER_API void popper_mc_free(popper_mc* mc);

/* ---------------------------------------------------------------- replay */

/* Replays a trajectory fixture file, or every *.json fixture under a
 * directory, and compares against the recorded checkpoints. *report_out
 * receives the human-readable report (also on mismatch). */
POPPER_API popper_status popper_replay_path(const char* path, char** report_out);

/* Re-renders the plain-text summary from a ledger JSONL document. */
POPPER_API popper_status popper_render_summary_from_ledger(const char* ledger_jsonl,
                                                           char** summary_out);

POPPER_API void popper_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* POPPER_H */
