/*
 * dbmc.h - C interface to the database Monte Carlo control-variate library.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Every fallible call returns a dbmc_status; on failure a description of the
 * most recent error on the calling thread is available from
 * dbmc_last_error_message(). Handles are not synchronised: share a loaded
 * database between threads only for read-only calls.
 */
#ifndef DBMC_DBMC_H
#define DBMC_DBMC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DBMC_BUILDING_LIBRARY)
#    define DBMC_API __declspec(dllexport)
#  else
#    define DBMC_API __declspec(dllimport)
#  endif
#else
#  define DBMC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dbmc_status {
  DBMC_OK = 0,
  DBMC_ERR_CONFIG = 1,
  DBMC_ERR_BLOWUP = 2,
  DBMC_ERR_IO = 3,
  DBMC_ERR_SINGULAR = 4,
  DBMC_ERR_FORMAT = 5,
  DBMC_ERR_CHECKSUM = 6,
  DBMC_ERR_INVALID_ARGUMENT = 7,
  DBMC_ERR_UNBOUNDED = 8,
  DBMC_ERR_DEGENERATE = 9,
  DBMC_ERR_INTERNAL = 10
} dbmc_status;

typedef enum dbmc_scheme {
  DBMC_SCHEME_CRUDE = 0,
  DBMC_SCHEME_I1 = 1,
  DBMC_SCHEME_I2 = 2
} dbmc_scheme;

typedef enum dbmc_observable {
  DBMC_OBSERVABLE_POINT = 1,      /* phi at one site and time */
  DBMC_OBSERVABLE_TOTAL_AT_T = 2, /* lattice sum at one time */
  DBMC_OBSERVABLE_SPACETIME = 3   /* lattice sum over every step */
} dbmc_observable;

typedef struct dbmc_config dbmc_config;
typedef struct dbmc_database dbmc_database;
typedef struct dbmc_estimate dbmc_estimate;
typedef struct dbmc_report dbmc_report;
typedef struct dbmc_validation dbmc_validation;

/* Message for the last failed call on this thread ("" if none). */
DBMC_API const char* dbmc_last_error_message(void);
DBMC_API const char* dbmc_status_name(dbmc_status status);
DBMC_API const char* dbmc_version(void);

/* ---- configuration ------------------------------------------------------ */

/* preset may be NULL (library defaults), "desk" or "paper". */
DBMC_API dbmc_status dbmc_config_create(const char* preset, dbmc_config** out);
DBMC_API void dbmc_config_destroy(dbmc_config* config);
DBMC_API dbmc_status dbmc_config_load_file(dbmc_config* config, const char* path);
/* key is "section.name", e.g. "model.lattice_size". */
DBMC_API dbmc_status dbmc_config_set(dbmc_config* config, const char* key, const char* value);
/* command: "build-db", "estimate", "sweep", "validate" or "info". */
DBMC_API dbmc_status dbmc_config_validate(const dbmc_config* config, const char* command);
/*
 * Writes the resolved configuration (INI text, NUL-terminated) into buf.
 * *needed receives the required size including the terminator; pass
 * buf = NULL, capacity = 0 to query it.
 */
DBMC_API dbmc_status dbmc_config_dump(const dbmc_config* config, char* buf, size_t capacity,
                                      size_t* needed);
/* Same contract as dbmc_config_dump for a string-valued key. */
DBMC_API dbmc_status dbmc_config_get(const dbmc_config* config, const char* key, char* buf,
                                     size_t capacity, size_t* needed);

/* ---- database ------------------------------------------------------------ */

typedef struct dbmc_database_info {
  uint64_t master_seed;
  uint64_t n_paths;
  uint32_t k;
  uint8_t generator_id;
  uint8_t format_version;
  dbmc_observable observable;
  uint32_t lattice_size;
  uint32_t n_steps;
  double dt;
  double dx;
  double chi;
  double diffusion;
  uint8_t initial_condition; /* 0 = zero, 1 = constant */
  double initial_value;
  uint32_t point_row;
  uint32_t point_col;
  uint32_t point_time_step;
} dbmc_database_info;

/* Setup stage from the config's [model] and [database] sections. */
DBMC_API dbmc_status dbmc_database_build(const dbmc_config* config, dbmc_database** out);
DBMC_API dbmc_status dbmc_database_load(const char* path, dbmc_database** out);
DBMC_API dbmc_status dbmc_database_save(const dbmc_database* db, const char* path);
DBMC_API void dbmc_database_destroy(dbmc_database* db);
DBMC_API dbmc_status dbmc_database_info_get(const dbmc_database* db, dbmc_database_info* out);
/* Copy k values; capacity must be at least k. */
DBMC_API dbmc_status dbmc_database_nominals(const dbmc_database* db, double* out, size_t capacity);
DBMC_API dbmc_status dbmc_database_means(const dbmc_database* db, double* out, size_t capacity);
DBMC_API dbmc_status dbmc_database_control(const dbmc_database* db, uint64_t path, uint32_t i,
                                           double* out);
/* Bitwise equality of two databases; *equal receives 0 or 1. */
DBMC_API dbmc_status dbmc_database_equal(const dbmc_database* a, const dbmc_database* b,
                                         int* equal);

/* ---- estimation ----------------------------------------------------------- */

typedef struct dbmc_estimate_summary {
  double estimate;
  double sample_variance;
  double std_error;
  double r_squared; /* NaN for crude */
  double theta;
  uint64_t n;
  uint32_t k; /* length of beta; 0 for crude */
  dbmc_scheme scheme;
} dbmc_estimate_summary;

/*
 * One estimate at theta. db may be NULL for the crude scheme (the model then
 * comes from the config); i1 and i2 use the database's model, nominals and
 * means. n and seed come from the arguments, not the config.
 */
DBMC_API dbmc_status dbmc_estimate_run(const dbmc_config* config, const dbmc_database* db,
                                       dbmc_scheme scheme, double theta, uint64_t n,
                                       uint64_t seed, dbmc_estimate** out);
DBMC_API void dbmc_estimate_destroy(dbmc_estimate* estimate);
DBMC_API dbmc_status dbmc_estimate_get_summary(const dbmc_estimate* estimate,
                                               dbmc_estimate_summary* out);
DBMC_API dbmc_status dbmc_estimate_beta(const dbmc_estimate* estimate, double* out,
                                        size_t capacity);
DBMC_API size_t dbmc_estimate_warning_count(const dbmc_estimate* estimate);
DBMC_API const char* dbmc_estimate_warning(const dbmc_estimate* estimate, size_t index);

/* ---- sweep ----------------------------------------------------------------- */

typedef struct dbmc_report_row {
  const char* estimator; /* owned by the report */
  double theta;
  double vrr;
  double vrr_stderr;
  double mean;
  double crude_var;
  double cv_var;
  uint64_t n_micro;
  uint64_t n_macro;
  const char* error; /* "" when the cell succeeded */
} dbmc_report_row;

DBMC_API dbmc_status dbmc_sweep_run(const dbmc_config* config, const dbmc_database* db,
                                    dbmc_report** out);
DBMC_API void dbmc_report_destroy(dbmc_report* report);
DBMC_API size_t dbmc_report_row_count(const dbmc_report* report);
DBMC_API dbmc_status dbmc_report_row_get(const dbmc_report* report, size_t index,
                                         dbmc_report_row* out);
DBMC_API dbmc_status dbmc_report_write_csv(const dbmc_report* report, const char* path);
DBMC_API dbmc_status dbmc_report_write_plot_table(const dbmc_report* report, const char* path);
/* Parses a CSV written by dbmc_report_write_csv. */
DBMC_API dbmc_status dbmc_report_read_csv(const char* path, dbmc_report** out);

/* ---- validation ------------------------------------------------------------ */

/*
 * Synthetic Gaussian oracle checks, a determinism rebuild and a save/load
 * roundtrip. If db_path is not NULL that file is also loaded and checked.
 */
DBMC_API dbmc_status dbmc_validate_run(uint64_t seed, const char* db_path, unsigned workers,
                                       dbmc_validation** out);
DBMC_API void dbmc_validation_destroy(dbmc_validation* validation);
DBMC_API size_t dbmc_validation_count(const dbmc_validation* validation);
DBMC_API dbmc_status dbmc_validation_get(const dbmc_validation* validation, size_t index,
                                         const char** name, int* passed, const char** detail);
DBMC_API int dbmc_validation_all_passed(const dbmc_validation* validation);

#ifdef __cplusplus
}
#endif

#endif /* DBMC_DBMC_H */
