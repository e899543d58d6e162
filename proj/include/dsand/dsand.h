/* C interface to the divisible sandpile library. All objects are opaque
 * handles owned by the caller and released with the matching _free call.
 * Every function returning dsand_status leaves a message for
 * dsand_last_error() on failure (thread-local). */
#ifndef DSAND_H
#define DSAND_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DSAND_API __declspec(dllexport)
#else
#define DSAND_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dsand_status {
  DSAND_OK = 0,
  DSAND_ERR_INVALID_ARGUMENT = 1,
  DSAND_ERR_IO = 2,
  DSAND_ERR_FORMAT = 3,
  DSAND_ERR_INVALID_SPECTRUM = 4,
  DSAND_ERR_MASS_MISMATCH = 5,
  DSAND_ERR_BOX_TOO_SMALL = 6,
  DSAND_ERR_NOT_CONVERGED = 7,
  DSAND_ERR_VALIDATION = 8,
  DSAND_ERR_RADIUS_CAP = 9,
  DSAND_ERR_INTERNAL = 10
} dsand_status;

typedef enum dsand_stabilization {
  DSAND_STABILIZED = 0,
  DSAND_EXPLODED = 1,
  DSAND_STEP_LIMIT = 2
} dsand_stabilization;

typedef struct dsand_field dsand_field;
typedef struct dsand_operator dsand_operator;
typedef struct dsand_run dsand_run;

DSAND_API const char* dsand_version(void);
DSAND_API const char* dsand_last_error(void);
DSAND_API const char* dsand_status_name(dsand_status status);

/* Worker threads; 0 restores the default (DSAND_THREADS or hardware). */
DSAND_API dsand_status dsand_set_threads(int threads);
DSAND_API void dsand_set_single_thread(int serial);
DSAND_API int dsand_thread_count(void);

/* values may be NULL for a zero field; otherwise n^dim doubles, row-major. */
DSAND_API dsand_status dsand_field_create(int dim, int n, const double* values, dsand_field** out);
DSAND_API dsand_status dsand_field_read(const char* path, dsand_field** out);
DSAND_API dsand_status dsand_field_write(const dsand_field* field, const char* path);
DSAND_API dsand_status dsand_field_info(const dsand_field* field, int* dim, int* n, size_t* size);
DSAND_API dsand_status dsand_field_values(const dsand_field* field, const double** values);
DSAND_API dsand_status dsand_field_stats(const dsand_field* field, double* min, double* max, double* mean);
DSAND_API dsand_status dsand_field_heatmap(const dsand_field* field, const char* path);
DSAND_API void dsand_field_free(dsand_field* field);

DSAND_API dsand_status dsand_operator_nn(int dim, int n, dsand_operator** out);
/* tolerance <= 0 selects the default kernel accuracy. */
DSAND_API dsand_status dsand_operator_lr(int dim, int n, double alpha, double tolerance, dsand_operator** out);
DSAND_API void dsand_operator_free(dsand_operator* op);

/* Initial configuration s = 1 + sigma - mean(sigma) with sigma from the named
 * sampler ("iid-gaussian", "stable", "pareto", "iid-uniform"). */
DSAND_API dsand_status dsand_sample_config(const char* sampler, int dim, int n, uint64_t seed, dsand_field** out);

DSAND_API dsand_status dsand_odometer_spectral(const dsand_operator* op, const dsand_field* s, dsand_field** u);

/* Parallel toppling until the total excess is <= tolerance (<= 0: 1e-10).
 * u_out and s_out may be NULL. */
DSAND_API dsand_status dsand_stabilize(const dsand_operator* op, const dsand_field* s, double tolerance,
                                       long max_steps, dsand_field** u_out, dsand_field** s_out,
                                       dsand_stabilization* result, long* steps);

/* Writes the 16 hex digit manifest hash plus a terminating NUL into hash. */
DSAND_API dsand_status dsand_manifest_validate(const char* path, char hash[17]);
/* output_dir may be NULL to use the manifest's own setting. */
DSAND_API dsand_status dsand_manifest_run(const char* path, const char* output_dir, dsand_run** out);
DSAND_API const char* dsand_run_record(const dsand_run* run);
/* 0 when every criterion passed, 2 otherwise. */
DSAND_API int dsand_run_exit_code(const dsand_run* run);
DSAND_API double dsand_run_wall_seconds(const dsand_run* run);
DSAND_API void dsand_run_free(dsand_run* run);

#ifdef __cplusplus
}
#endif

#endif
