#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "warmrnn/warmrnn.h"

static int failures = 0;

#define EXPECT(cond)                                                 \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                    \
    }                                                                \
  } while (0)

static void test_errors(void) {
  wr_config* cfg = NULL;
  EXPECT(wr_config_parse("{\"task\": \"bogus\"}", &cfg) == WR_ERR_VALIDATION);
  EXPECT(cfg == NULL);
  EXPECT(strcmp(wr_last_error_field(), "task") == 0);
  EXPECT(strstr(wr_last_error(), "bogus") != NULL);

  EXPECT(wr_config_parse("{not json", &cfg) == WR_ERR_PARSE);
  EXPECT(wr_config_load("/nonexistent/config.json", &cfg) == WR_ERR_IO);
  EXPECT(wr_network_output_dim(NULL, NULL) == WR_ERR_CONTRACT);

  EXPECT(wr_exit_code(WR_OK) == 0);
  EXPECT(wr_exit_code(WR_ERR_VALIDATION) == 1);
  EXPECT(wr_exit_code(WR_ERR_RUNTIME) == 2);
  EXPECT(wr_exit_code(WR_ERR_IO) == 2);
}

static void test_config(void) {
  wr_config* cfg = NULL;
  EXPECT(wr_config_parse("{\"task\": \"copy\", \"data\": {\"train_samples\": 100}}", &cfg) == WR_OK);
  EXPECT(wr_config_set(cfg, "network.layers=[8]") == WR_OK);
  EXPECT(wr_config_set(cfg, "data.length=-3") == WR_ERR_VALIDATION);
  EXPECT(strcmp(wr_last_error_field(), "data.length") == 0);
  EXPECT(wr_config_set_scale(cfg, 0.5) == WR_OK);
  EXPECT(wr_config_set_scale(cfg, -1.0) == WR_ERR_VALIDATION);
  const uint64_t seeds[] = {3, 4};
  EXPECT(wr_config_set_seeds(cfg, seeds, 2) == WR_OK);
  char* text = NULL;
  EXPECT(wr_config_resolved_json(cfg, &text) == WR_OK);
  EXPECT(text != NULL);
  EXPECT(strstr(text, "\"train_samples\": 50") != NULL);
  EXPECT(strstr(text, "\"scale\": 0.5") != NULL);
  wr_string_free(text);

  char* summary = NULL;
  EXPECT(wr_run(cfg, "dance", &summary) == WR_ERR_VALIDATION);
  EXPECT(strcmp(wr_last_error_field(), "command") == 0);
  EXPECT(summary == NULL);
  wr_config_free(cfg);
}

static void test_network(const char* dir) {
  const size_t widths[] = {5, 3};
  wr_network* net = NULL;
  EXPECT(wr_network_create("tanh", 2, widths, 2, 1, &net) == WR_ERR_CONTRACT);
  EXPECT(wr_network_create("GRU", 2, widths, 2, 1, &net) == WR_OK);
  size_t out_dim = 0;
  EXPECT(wr_network_output_dim(net, &out_dim) == WR_OK && out_dim == 1);

  wr_params* p = NULL;
  EXPECT(wr_params_init(net, 7, &p) == WR_OK);
  size_t count = 0;
  EXPECT(wr_params_scalar_count(p, &count) == WR_OK);
  /* 3 * (5 * (5 + 2) + 5) + 3 * (3 * (3 + 5) + 3) + (3 + 1) */
  EXPECT(count == 120 + 81 + 4);

  const double inputs[] = {0.5, -1.0, 1.0, 0.25, 0.0, 2.0};
  double y1 = 0.0;
  double y2 = 0.0;
  EXPECT(wr_network_forward(net, p, inputs, 3, &y1, 1) == WR_OK);
  EXPECT(wr_network_forward(net, p, inputs, 3, &y1, 2) == WR_ERR_CONTRACT);

  char path[512];
  snprintf(path, sizeof path, "%s/params.ckpt", dir);
  EXPECT(wr_params_save(p, path) == WR_OK);
  wr_params* q = NULL;
  EXPECT(wr_params_load(path, &q) == WR_OK);
  uint64_t h1 = 0;
  uint64_t h2 = 0;
  EXPECT(wr_params_hash(p, &h1) == WR_OK && wr_params_hash(q, &h2) == WR_OK);
  EXPECT(h1 == h2);
  EXPECT(wr_network_forward(net, q, inputs, 3, &y2, 1) == WR_OK);
  EXPECT(y1 == y2);
  EXPECT(isfinite(y1));

  double seqs[4 * 3 * 2];
  for (int i = 0; i < 24; ++i) seqs[i] = sin(0.7 * i);
  double mean = 0.0;
  EXPECT(wr_vaa_estimate(net, p, seqs, 4, 3, 50, 1e-4, 2, 1, &mean) == WR_OK);
  EXPECT(mean >= 0.25 && mean <= 1.0);

  wr_params_free(q);
  wr_params_free(p);
  wr_network_free(net);
}

static void test_tmaze(void) {
  wr_tmaze* env = NULL;
  EXPECT(wr_tmaze_create(0, 1, &env) == WR_ERR_CONTRACT);
  EXPECT(wr_tmaze_create(2, 1, &env) == WR_OK);
  double reward = 0.0;
  int obs = -1;
  int terminal = 0;
  EXPECT(wr_tmaze_step(env, 0, &reward, &obs, &terminal) == WR_ERR_CONTRACT);
  EXPECT(wr_tmaze_reset(env, &obs) == WR_OK);
  EXPECT(obs == 0 || obs == 1);
  int x = -1, y = -1, up = -1;
  EXPECT(wr_tmaze_position(env, &x, &y, &up) == WR_OK);
  EXPECT(x == 0 && y == 0);
  EXPECT(up == (obs == 0));
  const int first = obs;

  EXPECT(wr_tmaze_step(env, 2, &reward, &obs, &terminal) == WR_OK); /* left wall */
  EXPECT(reward == -0.1 && terminal == 0 && obs == first);
  EXPECT(wr_tmaze_step(env, 0, &reward, &obs, &terminal) == WR_OK);
  EXPECT(reward == 0.0 && obs == 2);
  EXPECT(wr_tmaze_step(env, 0, &reward, &obs, &terminal) == WR_OK);
  EXPECT(obs == 3);
  EXPECT(wr_tmaze_step(env, up ? 1 : 3, &reward, &obs, &terminal) == WR_OK);
  EXPECT(reward == 4.0 && terminal == 1);
  EXPECT(wr_tmaze_step(env, 7, &reward, &obs, &terminal) == WR_ERR_CONTRACT);
  wr_tmaze_free(env);

  size_t h = 0;
  EXPECT(wr_truncation_horizon(20, &h) == WR_OK && h == 60);
}

int main(int argc, char** argv) {
  const char* dir = argc > 1 ? argv[1] : ".";
  EXPECT(strlen(wr_version()) > 0);
  test_errors();
  test_config();
  test_network(dir);
  test_tmaze();
  if (failures == 0) printf("capi: all checks passed\n");
  return failures == 0 ? 0 : 1;
}
