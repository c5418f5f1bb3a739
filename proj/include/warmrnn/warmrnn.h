#ifndef WARMRNN_H
#define WARMRNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define WR_API __declspec(dllexport)
#else
#define WR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every call returns a status; on failure wr_last_error() describes it. */
typedef enum wr_status {
  WR_OK = 0,
  WR_ERR_VALIDATION = 1, /* bad config or argument value */
  WR_ERR_RUNTIME = 2,    /* divergence or other runtime failure */
  WR_ERR_IO = 3,
  WR_ERR_PARSE = 4,
  WR_ERR_CONTRACT = 5,   /* violated precondition, null handle */
  WR_ERR_INTERNAL = 6
} wr_status;

/* Thread-local message of the last failing call on this thread. */
WR_API const char* wr_last_error(void);
/* Field path of the last validation error, or "" */
WR_API const char* wr_last_error_field(void);
WR_API const char* wr_version(void);
/* Process exit code for a status: 0 ok, 1 validation, 2 anything else. */
WR_API int wr_exit_code(wr_status status);

/* Strings returned through char** are owned by the caller. */
WR_API void wr_string_free(char* s);

/* ---- experiment configs ---- */
typedef struct wr_config wr_config;

WR_API wr_status wr_config_load(const char* path, wr_config** out);
WR_API wr_status wr_config_parse(const char* json_text, wr_config** out);
WR_API void wr_config_free(wr_config* cfg);
/* "a.b=value"; value is JSON when it parses, otherwise a string. */
WR_API wr_status wr_config_set(wr_config* cfg, const char* assignment);
WR_API wr_status wr_config_set_seeds(wr_config* cfg, const uint64_t* seeds, size_t count);
WR_API wr_status wr_config_set_output(wr_config* cfg, const char* dir);
WR_API wr_status wr_config_set_scale(wr_config* cfg, double factor);
/* Validated, resolved config (scale applied) as JSON. */
WR_API wr_status wr_config_resolved_json(const wr_config* cfg, char** out);

/* command: warmup | train | rl | vaa-probe | gradcheck. Writes artifacts to
 * the configured output directory; the summary JSON is returned. */
WR_API wr_status wr_run(const wr_config* cfg, const char* command, char** summary_json);
/* Text table of a summary.json file. */
WR_API wr_status wr_report(const char* summary_path, char** text);

/* ---- networks and parameters ---- */
typedef struct wr_network wr_network;
typedef struct wr_params wr_params;

/* cell: "GRU" | "LSTM" | "MGU"; widths of `layer_count` stacked layers;
 * output_dim 0 means no head. */
WR_API wr_status wr_network_create(const char* cell, size_t input_dim, const size_t* widths, size_t layer_count,
                                   size_t output_dim, wr_network** out);
WR_API void wr_network_free(wr_network* net);
WR_API wr_status wr_network_output_dim(const wr_network* net, size_t* out);

WR_API wr_status wr_params_init(const wr_network* net, uint64_t seed, wr_params** out);
WR_API void wr_params_free(wr_params* params);
WR_API wr_status wr_params_scalar_count(const wr_params* params, size_t* out);
WR_API wr_status wr_params_hash(const wr_params* params, uint64_t* out);
WR_API wr_status wr_params_save(const wr_params* params, const char* path);
WR_API wr_status wr_params_load(const char* path, wr_params** out);

/* Runs `steps` input rows (steps x input_dim, row-major) through the network
 * from the zero state; writes the final output (output width values). */
WR_API wr_status wr_network_forward(const wr_network* net, const wr_params* params, const double* inputs,
                                    size_t steps, double* output, size_t output_len);

/* Mean truncated VAA over `iterations` draws, with states sampled along the
 * given sequences (count sequences of equal length `steps`). */
WR_API wr_status wr_vaa_estimate(const wr_network* net, const wr_params* params, const double* sequences,
                                 size_t count, size_t steps, size_t stabilization, double epsilon,
                                 size_t iterations, uint64_t seed, double* mean);

/* ---- T-Maze ---- */
typedef struct wr_tmaze wr_tmaze;

/* Actions: 0 Right, 1 Up, 2 Left, 3 Down.
 * Observations: 0 Up, 1 Down, 2 Corridor, 3 Junction. */
WR_API wr_status wr_tmaze_create(int length, uint64_t seed, wr_tmaze** out);
WR_API void wr_tmaze_free(wr_tmaze* env);
WR_API wr_status wr_tmaze_reset(wr_tmaze* env, int* observation);
WR_API wr_status wr_tmaze_step(wr_tmaze* env, int action, double* reward, int* observation, int* terminal);
WR_API wr_status wr_tmaze_position(const wr_tmaze* env, int* x, int* y, int* layout_up);
WR_API wr_status wr_truncation_horizon(int length, size_t* out);

#ifdef __cplusplus
}
#endif

#endif
