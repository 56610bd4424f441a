/* SPDX-License-Identifier: Apache-2.0
 * Copyright 2026 The s3net Authors
 *
 * C interface to the s3net library. Every function returns an s3_status;
 * on failure s3_last_error() and s3_last_error_kind() describe the cause for
 * the calling thread. Handles are opaque and owned by the caller.
 */
#ifndef S3NET_S3NET_H
#define S3NET_S3NET_H

#include <stddef.h>
#include <stdint.h>

#if defined(S3NET_BUILDING_LIBRARY)
#define S3_API __attribute__((visibility("default")))
#else
#define S3_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes. */
typedef enum s3_status {
    S3_OK = 0,
    S3_ERR_INTERNAL = 1,
    S3_ERR_CONFIG = 2,  /* invalid configuration or argument */
    S3_ERR_DATA = 3,    /* format, version, checksum, shape, domain, io, ... */
    S3_ERR_NUMERIC = 4, /* divergence or a failed numeric check */
} s3_status;

typedef enum s3_mode { S3_MODE_DENSE = 0, S3_MODE_TT = 1, S3_MODE_TT_QUANT = 2, S3_MODE_DENSE_QUANT = 3 } s3_mode;

typedef struct s3_config s3_config;
typedef struct s3_report s3_report;
typedef struct s3_model s3_model;
typedef struct s3_dataset s3_dataset;

S3_API const char* s3_version(void);
S3_API const char* s3_last_error(void);
S3_API const char* s3_last_error_kind(void);

/* Run configuration. Keys: preset, mode, ranks, tolerance, epochs, lr,
 * momentum, batch-size, seed, threads, deterministic, data, eval-data,
 * checkpoint, out, report, literal-floor, state-quant, precision, reps,
 * count. Unknown keys and malformed values are S3_ERR_CONFIG. */
S3_API s3_status s3_config_create(s3_config** out);
S3_API void s3_config_destroy(s3_config* cfg);
S3_API s3_status s3_config_set(s3_config* cfg, const char* key, const char* value);

/* Commands: train, eval, compress, quantize, bench, ablate, gradcheck, gen,
 * stats. When a command completes but its check fails, *out still receives
 * the report and the status is non-zero. */
S3_API s3_status s3_run(const char* command, const s3_config* cfg, s3_report** out);

S3_API const char* s3_report_text(const s3_report* report);
S3_API const char* s3_report_json(const s3_report* report);
S3_API s3_status s3_report_number(const s3_report* report, const char* key, double* value);
S3_API void s3_report_destroy(s3_report* report);

/* Checkpoints and feature files. */
S3_API s3_status s3_model_load(const char* path, s3_model** out);
S3_API void s3_model_destroy(s3_model* model);
S3_API s3_status s3_model_info(const s3_model* model, size_t* input_size, size_t* hidden_size, size_t* num_classes,
                               s3_mode* mode);
/* frames: num_frames x input_size values, row-major. scores: num_classes values. */
S3_API s3_status s3_model_predict(const s3_model* model, const float* frames, size_t num_frames, double* scores,
                                  size_t scores_len, size_t* prediction);

S3_API s3_status s3_dataset_load(const char* path, s3_dataset** out);
S3_API void s3_dataset_destroy(s3_dataset* data);
S3_API size_t s3_dataset_size(const s3_dataset* data);
S3_API s3_status s3_model_evaluate(const s3_model* model, const s3_dataset* data, size_t threads, double* accuracy);

#ifdef __cplusplus
}
#endif

#endif /* S3NET_S3NET_H */
