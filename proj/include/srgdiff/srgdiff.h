/* Copyright 2026 The SRGDiff Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the SRGDiff experiment pipeline. All handles are opaque;
 * every call returns a status code and records a message retrievable with
 * srgdiff_last_error() on the calling thread. */

#ifndef SRGDIFF_SRGDIFF_H_
#define SRGDIFF_SRGDIFF_H_

#include <stddef.h>

#if defined(_WIN32)
#define SRGDIFF_API __declspec(dllexport)
#else
#define SRGDIFF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum srgdiff_status {
  SRGDIFF_OK = 0,
  SRGDIFF_ERR_CONFIG = 1,      /* invalid config, unknown stage, missing prerequisite */
  SRGDIFF_ERR_IO = 2,          /* file system failure */
  SRGDIFF_ERR_FORMAT = 3,      /* malformed or inconsistent artifact */
  SRGDIFF_ERR_NUMERICAL = 4,   /* non-finite values */
  SRGDIFF_ERR_INTERNAL = 5,    /* anything else */
  SRGDIFF_ERR_ARGUMENT = 6     /* null handle or pointer */
} srgdiff_status;

typedef struct srgdiff_config srgdiff_config;
typedef struct srgdiff_artifacts srgdiff_artifacts;

SRGDIFF_API const char* srgdiff_version(void);

/* Message of the last failed call on this thread; empty after success. */
SRGDIFF_API const char* srgdiff_last_error(void);

/* Process exit code for a status: 0 success, 1 config error, 2 runtime error. */
SRGDIFF_API int srgdiff_exit_code(srgdiff_status status);

SRGDIFF_API srgdiff_status srgdiff_config_load(const char* path, srgdiff_config** out);
/* base_dir may be NULL; relative output directories then stay relative. */
SRGDIFF_API srgdiff_status srgdiff_config_parse(const char* text, const char* base_dir, srgdiff_config** out);
SRGDIFF_API void srgdiff_config_free(srgdiff_config* config);
SRGDIFF_API const char* srgdiff_config_output_dir(const srgdiff_config* config);
SRGDIFF_API srgdiff_status srgdiff_config_set_output_dir(srgdiff_config* config, const char* dir);

/* Number of stage names and the i-th name, in pipeline order. */
SRGDIFF_API size_t srgdiff_stage_count(void);
SRGDIFF_API const char* srgdiff_stage_name(size_t index);

/* Runs one stage ("synth", "train-vae", "train-sr", "superres", "eval",
 * "topomap"). On success *out lists the written artifacts; free it with
 * srgdiff_artifacts_free. out may be NULL. */
SRGDIFF_API srgdiff_status srgdiff_run_stage(const srgdiff_config* config, const char* stage,
                                             srgdiff_artifacts** out);

SRGDIFF_API size_t srgdiff_artifacts_count(const srgdiff_artifacts* artifacts);
SRGDIFF_API const char* srgdiff_artifacts_path(const srgdiff_artifacts* artifacts, size_t index);
SRGDIFF_API void srgdiff_artifacts_free(srgdiff_artifacts* artifacts);

/* Value of `key` in the evaluation summary of the configured output dir. */
SRGDIFF_API srgdiff_status srgdiff_summary_value(const srgdiff_config* config, const char* key, double* value);

#ifdef __cplusplus
}
#endif

#endif /* SRGDIFF_SRGDIFF_H_ */
