/* krigbench C interface.
 *
 * All functions returning kb_status report failures through a status code
 * plus a thread-local message from kb_last_error_message(). Strings
 * returned by the library stay valid until the owning handle is freed or
 * the next call on that handle.
 */
#ifndef KRIGBENCH_KRIGBENCH_H
#define KRIGBENCH_KRIGBENCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(KRIGBENCH_BUILDING)
#define KB_API __attribute__((visibility("default")))
#else
#define KB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kb_status {
  KB_OK = 0,
  KB_ERR_CONFIG = 1,
  KB_ERR_PARSE = 2,
  KB_ERR_SHAPE = 3,
  KB_ERR_IO = 4,
  KB_ERR_DEGENERATE_SCALE = 5,
  KB_ERR_NUMERICAL = 6,
  KB_ERR_UNSUPPORTED_PHASE = 7,
  KB_ERR_DEGENERATE_BATCH = 8,
  KB_ERR_TRAINING_ABORT = 9,
  KB_ERR_CONTRACT = 10,
  KB_ERR_UNDEFINED_RATIO = 11,
  KB_ERR_CHECKPOINT_NOT_FOUND = 12,
  KB_ERR_INVALID_ARGUMENT = 13,
  KB_ERR_INTERNAL = 14
} kb_status;

typedef struct kb_field kb_field;
typedef struct kb_experiment kb_experiment;

KB_API const char* kb_version(void);
/* Stable kind name, e.g. "checkpoint-not-found"; "ok" for KB_OK. */
KB_API const char* kb_status_kind(kb_status status);
/* Message of the last failed call on this thread ("" if none). */
KB_API const char* kb_last_error_message(void);

/* Sensor fields. format is "csv-wide" or "packed-binary". */
KB_API kb_status kb_field_load(const char* path, const char* format, kb_field** out);
KB_API kb_status kb_field_synth(int n_nodes, int n_steps, double length_scale, double temporal_rho,
                                double noise_std, uint64_t seed, kb_field** out);
KB_API kb_status kb_field_save(const kb_field* field, const char* path, const char* format);
KB_API int kb_field_n_nodes(const kb_field* field);
KB_API int kb_field_n_steps(const kb_field* field);
/* observed receives 1 or 0; value is NaN when unobserved. */
KB_API kb_status kb_field_value(const kb_field* field, int node, int step, double* value, int* observed);
KB_API kb_status kb_field_coord(const kb_field* field, int node, double* x, double* y);
KB_API void kb_field_free(kb_field* field);

/* Experiments. config_path NULL means all defaults. */
KB_API kb_status kb_experiment_from_file(const char* config_path, kb_experiment** out);
KB_API kb_status kb_experiment_from_json(const char* json_text, kb_experiment** out);
KB_API kb_status kb_experiment_set_output_dir(kb_experiment* exp, const char* dir);
/* Overrides both the split seed and the trainer seed. */
KB_API kb_status kb_experiment_set_seed(kb_experiment* exp, uint64_t seed);
KB_API const char* kb_experiment_config_json(kb_experiment* exp);
KB_API const char* kb_experiment_config_hash(kb_experiment* exp);

/* command: split, train, evaluate, baseline, shift, synth or sweep.
 * method: drik, m0..m7, mean, knn, okriging, or NULL for the command's
 * default (drik; every configured baseline for "baseline").
 * phase: "validate", "test", or NULL for test (shift: the configured phase).
 * threads: sweep workers, 0 for KRIGBENCH_THREADS or the core count. */
KB_API kb_status kb_experiment_run(kb_experiment* exp, const char* command, const char* method,
                                   const char* phase, int threads);
/* JSON summary of the last successful run. */
KB_API const char* kb_experiment_result(kb_experiment* exp);
KB_API void kb_experiment_free(kb_experiment* exp);

#ifdef __cplusplus
}
#endif

#endif /* KRIGBENCH_KRIGBENCH_H */
