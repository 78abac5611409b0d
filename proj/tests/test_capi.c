/* Exercises the C API from C. */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "trajlab/trajlab.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond);  \
      ++failures;                                                 \
    }                                                             \
  } while (0)

int main(int argc, char** argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: test_capi <scratch dir>\n");
    return 2;
  }
  char path[4096];

  EXPECT(strlen(trajlab_version()) > 0);
  EXPECT(strcmp(trajlab_status_name(TRAJLAB_ERR_CHECKPOINT), "checkpoint") == 0);
  EXPECT(trajlab_exit_code(TRAJLAB_OK) == 0);
  EXPECT(trajlab_exit_code(TRAJLAB_ERR_CONFIG) == 2);
  EXPECT(trajlab_exit_code(TRAJLAB_ERR_PARAMETER) == 2);
  EXPECT(trajlab_exit_code(TRAJLAB_ERR_IO) == 3);
  EXPECT(trajlab_exit_code(TRAJLAB_ERR_FORMAT) == 3);
  EXPECT(trajlab_exit_code(TRAJLAB_ERR_CHECKPOINT) == 3);
  EXPECT(trajlab_exit_code(TRAJLAB_ERR_NUMERIC) == 4);
  EXPECT(trajlab_exit_code(TRAJLAB_ERR_SHAPE) == 4);
  EXPECT(trajlab_exit_code(TRAJLAB_ERR_INTERNAL) == 1);

  /* configuration */
  trajlab_config* cfg = NULL;
  EXPECT(trajlab_config_new(&cfg) == TRAJLAB_OK);
  EXPECT(trajlab_config_set(cfg, "lstm_cells", "2") == TRAJLAB_OK);
  char* v = NULL;
  EXPECT(trajlab_config_get(cfg, "lstm_cells", &v) == TRAJLAB_OK);
  EXPECT(v && strcmp(v, "2") == 0);
  trajlab_string_free(v);
  EXPECT(trajlab_config_set(cfg, "hiden_units", "10") == TRAJLAB_ERR_CONFIG);
  EXPECT(strstr(trajlab_last_error(), "hiden_units") != NULL);
  EXPECT(trajlab_config_set(cfg, "lstm_cells", "0") == TRAJLAB_ERR_CONFIG);
  EXPECT(trajlab_config_set(cfg, "epochs", "1") == TRAJLAB_OK);
  EXPECT(trajlab_config_set(cfg, "cnn_fc1", "16") == TRAJLAB_OK);
  EXPECT(trajlab_config_set(cfg, "cnn_fc2", "16") == TRAJLAB_OK);
  EXPECT(trajlab_config_set(cfg, "hidden_units", "8") == TRAJLAB_OK);
  EXPECT(trajlab_config_set(cfg, "batch_size", "25") == TRAJLAB_OK);
  char* text = NULL;
  EXPECT(trajlab_config_to_json(cfg, &text) == TRAJLAB_OK);
  trajlab_config* copy = NULL;
  EXPECT(trajlab_config_parse(text, &copy) == TRAJLAB_OK);
  char* text2 = NULL;
  EXPECT(trajlab_config_to_json(copy, &text2) == TRAJLAB_OK);
  EXPECT(text && text2 && strcmp(text, text2) == 0);
  trajlab_string_free(text);
  trajlab_string_free(text2);
  trajlab_config_free(copy);
  EXPECT(trajlab_config_parse("{", &copy) == TRAJLAB_ERR_CONFIG);

  /* dataset, training, evaluation */
  snprintf(path, sizeof path, "%s/data", argv[1]);
  char* manifest = NULL;
  EXPECT(trajlab_generate(1, 5, 30, 2, 80, 60, path, 1, &manifest) == TRAJLAB_OK);
  EXPECT(manifest && strstr(manifest, "\"episodes\"") != NULL);
  trajlab_string_free(manifest);
  EXPECT(trajlab_generate(3, 5, 30, 2, 80, 60, path, 1, NULL) == TRAJLAB_ERR_PARAMETER);

  trajlab_model* model = NULL;
  char* history = NULL;
  EXPECT(trajlab_train(path, cfg, 1, NULL, NULL, &model, &history) == TRAJLAB_OK);
  EXPECT(history && strstr(history, "\"epochs\"") != NULL);
  trajlab_string_free(history);

  char ckpt[4096], report[4096];
  snprintf(ckpt, sizeof ckpt, "%s/m.ckpt", argv[1]);
  snprintf(report, sizeof report, "%s/r.json", argv[1]);
  EXPECT(model && trajlab_model_save(model, ckpt) == TRAJLAB_OK);
  trajlab_model* loaded = NULL;
  EXPECT(trajlab_model_load(ckpt, &loaded) == TRAJLAB_OK);
  char* table = NULL;
  EXPECT(trajlab_evaluate(loaded, path, "test", 1, report, &table) == TRAJLAB_OK);
  EXPECT(table && strstr(table, "AED") != NULL);
  trajlab_string_free(table);
  EXPECT(trajlab_evaluate(loaded, path, "bogus", 1, report, NULL) == TRAJLAB_ERR_PARAMETER);

  char* pred = NULL;
  EXPECT(trajlab_predict(loaded, path, 0, 4, &pred) == TRAJLAB_OK);
  EXPECT(pred && strstr(pred, "\"pred\"") != NULL);
  trajlab_string_free(pred);
  EXPECT(trajlab_predict(loaded, path, 0, 2, &pred) == TRAJLAB_ERR_PARAMETER);

  snprintf(path, sizeof path, "%s/missing.ckpt", argv[1]);
  trajlab_model* none = NULL;
  EXPECT(trajlab_model_load(path, &none) == TRAJLAB_ERR_IO);
  EXPECT(none == NULL);
  EXPECT(strlen(trajlab_last_error()) > 0);

  trajlab_model_free(model);
  trajlab_model_free(loaded);
  trajlab_config_free(cfg);
  trajlab_model_free(NULL);
  trajlab_config_free(NULL);
  trajlab_string_free(NULL);

  if (failures) {
    fprintf(stderr, "%d C API check(s) failed\n", failures);
    return 1;
  }
  printf("all C API checks passed\n");
  return 0;
}
