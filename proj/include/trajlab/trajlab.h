/* trajlab C API.
 *
 * Every function returns a trajlab_status. On failure a message is available
 * from trajlab_last_error() on the calling thread until the next call.
 * Strings returned through char** out-parameters are owned by the caller and
 * released with trajlab_string_free().
 */
#ifndef TRAJLAB_H
#define TRAJLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TRAJLAB_API __declspec(dllexport)
#else
#define TRAJLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum trajlab_status {
  TRAJLAB_OK = 0,
  TRAJLAB_ERR_SHAPE = 1,
  TRAJLAB_ERR_PARAMETER = 2,
  TRAJLAB_ERR_NUMERIC = 3,
  TRAJLAB_ERR_FORMAT = 4,
  TRAJLAB_ERR_IO = 5,
  TRAJLAB_ERR_CONFIG = 6,
  TRAJLAB_ERR_CHECKPOINT = 7,
  TRAJLAB_ERR_INTERNAL = 8
} trajlab_status;

/* Model and run configuration. */
typedef struct trajlab_config trajlab_config;
/* Trained parameters together with their configuration. */
typedef struct trajlab_model trajlab_model;

TRAJLAB_API const char* trajlab_version(void);
TRAJLAB_API const char* trajlab_last_error(void);
TRAJLAB_API const char* trajlab_status_name(trajlab_status s);
/* Process exit code for a status: 0 ok, 2 parameter/config, 3 io/format/
 * checkpoint, 4 numeric/shape, 1 internal. */
TRAJLAB_API int trajlab_exit_code(trajlab_status s);
TRAJLAB_API void trajlab_string_free(char* s);

/* Configuration. A config holds every model key plus the run keys listed by
 * trajlab_config_run_keys(). Unknown keys are rejected with the key named. */
TRAJLAB_API trajlab_status trajlab_config_new(trajlab_config** out);
TRAJLAB_API trajlab_status trajlab_config_parse(const char* json_text, trajlab_config** out);
TRAJLAB_API trajlab_status trajlab_config_load(const char* path, trajlab_config** out);
/* value_json is a JSON value, e.g. "4", "\"d1\"" or "[1,2]". */
TRAJLAB_API trajlab_status trajlab_config_set(trajlab_config* cfg, const char* key,
                                              const char* value_json);
/* Returns "null" for an unset run key. */
TRAJLAB_API trajlab_status trajlab_config_get(const trajlab_config* cfg, const char* key,
                                              char** value_json);
TRAJLAB_API trajlab_status trajlab_config_to_json(const trajlab_config* cfg, char** json_text);
/* Comma-separated run keys accepted next to the model keys. */
TRAJLAB_API const char* trajlab_config_run_keys(void);
TRAJLAB_API void trajlab_config_free(trajlab_config* cfg);

/* Dataset. manifest_json may be NULL. */
TRAJLAB_API trajlab_status trajlab_generate(int level, int episodes, int64_t frames_per_episode,
                                            uint64_t seed, int width, int height,
                                            const char* out_dir, int jobs, char** manifest_json);
TRAJLAB_API trajlab_status trajlab_split(const char* data_dir, uint64_t seed, double train,
                                         double val, double test, char** manifest_json);

/* Training. The callback, if given, runs after every epoch. */
typedef void (*trajlab_epoch_fn)(int epoch, double train_mse, double val_mse, double wall_s,
                                 void* user);
TRAJLAB_API trajlab_status trajlab_train(const char* data_dir, const trajlab_config* cfg, int jobs,
                                         trajlab_epoch_fn on_epoch, void* user,
                                         trajlab_model** out, char** history_json);

TRAJLAB_API trajlab_status trajlab_model_load(const char* path, trajlab_model** out);
TRAJLAB_API trajlab_status trajlab_model_save(const trajlab_model* m, const char* path);
TRAJLAB_API trajlab_status trajlab_model_config_json(const trajlab_model* m, char** json_text);
TRAJLAB_API void trajlab_model_free(trajlab_model* m);

/* Evaluates on a split ("train", "val" or "test") and writes <report>,
 * <report>.table.txt and <report>.trajectories.jsonl. table_text may be NULL. */
TRAJLAB_API trajlab_status trajlab_evaluate(const trajlab_model* m, const char* data_dir,
                                            const char* split, int jobs, const char* report_path,
                                            char** table_text);

/* Trains and evaluates one model per cell count. Writes ablation.json,
 * ablation.txt and per-variant checkpoints and reports into out_dir. */
TRAJLAB_API trajlab_status trajlab_ablate(const char* data_dir, const trajlab_config* cfg,
                                          const int* cells, size_t n_cells, int jobs,
                                          const char* out_dir, char** table_text);

/* Predicts the trajectory following anchor frame `frame` of an episode.
 * result_json holds the anchor pose and the predicted and true points. */
TRAJLAB_API trajlab_status trajlab_predict(const trajlab_model* m, const char* data_dir,
                                           int episode, int64_t frame, char** result_json);

/* Runs the gradient-check suite over seeds [0, n_seeds) at both precisions.
 * *all_pass is set to 1 when every kind is within tolerance. */
TRAJLAB_API trajlab_status trajlab_gradcheck(int n_seeds, int include_model, char** report_json,
                                             int* all_pass);

/* Converts a report (or its trajectories file) into columnar plot data. */
TRAJLAB_API trajlab_status trajlab_plot(const char* report_path, const char* out_path);

#ifdef __cplusplus
}
#endif

#endif
