#ifndef GENCAT_CAPI_H
#define GENCAT_CAPI_H

/* C interface to the gencat experiment runner. All functions are
 * thread-compatible (a runner must not be shared across threads without
 * external synchronization). Strings returned by the library stay owned by
 * the runner and remain valid until the next call on the same runner. */

#ifdef __cplusplus
extern "C" {
#endif

typedef struct gencat_runner gencat_runner;

/* Error codes returned by every fallible call. */
enum {
  GENCAT_OK = 0,
  GENCAT_ERR_CONFIG = 1,           /* bad configuration value or key */
  GENCAT_ERR_PARSE = 2,            /* malformed input file */
  GENCAT_ERR_VALIDATION = 3,       /* data violates an invariant */
  GENCAT_ERR_IO = 4,               /* file read/write failure */
  GENCAT_ERR_NUMERIC = 5,          /* non-finite or unstable computation */
  GENCAT_ERR_MISSING_ARTIFACT = 6, /* prerequisite stage output not found */
  GENCAT_ERR_INVALID_ARGUMENT = 7, /* null pointer or empty argument */
  GENCAT_ERR_UNKNOWN = 8
};

/* Library version, e.g. "0.1.0". Static storage; never freed. */
const char* gencat_version(void);

/* Creates a runner holding the default configuration, or NULL on allocation
 * failure. Destroy with gencat_runner_destroy. */
gencat_runner* gencat_runner_create(void);
void gencat_runner_destroy(gencat_runner* runner);

/* Replaces the runner's configuration with the JSON document at path.
 * Overrides applied earlier are discarded. */
int gencat_runner_load_config(gencat_runner* runner, const char* path);

/* Applies one "dotted.path=value" override on top of the current
 * configuration. The value parses as JSON, falling back to a bare string. */
int gencat_runner_set_override(gencat_runner* runner, const char* assignment);

/* Runs one pipeline stage ("synth", "split", "train_girt", "align_dpo",
 * "train_scorer", "fit_irt", "simulate", "evaluate") or "pipeline" for all of
 * them, writing artifacts under run_dir. */
int gencat_runner_run(gencat_runner* runner, const char* stage, const char* run_dir);

/* Fully materialized configuration as a JSON string (validates first).
 * Returns NULL and records the error when the configuration is invalid. */
const char* gencat_runner_resolved_config(gencat_runner* runner);

/* Message of the most recent failure on this runner; empty string if the
 * last call succeeded. */
const char* gencat_runner_last_error(const gencat_runner* runner);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GENCAT_CAPI_H */
