#include "warmrnn/warmrnn.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "warmrnn/errors.hpp"
#include "warmrnn/experiment.hpp"
#include "warmrnn/tmaze.hpp"
#include "warmrnn/vaa.hpp"

struct wr_config {
  nlohmann::json raw;
};

struct wr_network {
  warmrnn::rnn::Network net;
};

struct wr_params {
  warmrnn::ad::ParameterSet params;
};

struct wr_tmaze {
  warmrnn::tmaze::Env env;
  warmrnn::Rng rng;
  warmrnn::tmaze::State state;
  bool started = false;
};

namespace {

namespace ex = warmrnn::experiment;

thread_local std::string g_error;
thread_local std::string g_field;

wr_status fail(wr_status s, const std::string& message, std::string field = {}) {
  g_error = message;
  g_field = std::move(field);
  return s;
}

template <typename F>
wr_status guarded(F&& body) {
  g_error.clear();
  g_field.clear();
  try {
    body();
    return WR_OK;
  } catch (const warmrnn::ValidationError& e) {
    return fail(WR_ERR_VALIDATION, e.what(), e.field());
  } catch (const warmrnn::ContractViolation& e) {
    return fail(WR_ERR_CONTRACT, e.what());
  } catch (const warmrnn::IoError& e) {
    return fail(WR_ERR_IO, e.what());
  } catch (const warmrnn::ParseError& e) {
    return fail(WR_ERR_PARSE, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(WR_ERR_VALIDATION, e.what());
  } catch (const std::bad_alloc&) {
    return fail(WR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(WR_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(WR_ERR_INTERNAL, "unknown exception");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw warmrnn::ContractViolation(what);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_config_text(const char* text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false, true);
  if (j.is_discarded()) throw warmrnn::ParseError("config is not valid JSON");
  return j;
}

// Applies `edit` to a copy and keeps it only if the result still validates.
template <typename F>
void edit_config(wr_config* cfg, F&& edit) {
  require(cfg != nullptr, "null config handle");
  nlohmann::json next = cfg->raw;
  edit(next);
  ex::resolve(next);
  cfg->raw = std::move(next);
}

}  // namespace

extern "C" {

const char* wr_last_error(void) { return g_error.c_str(); }
const char* wr_last_error_field(void) { return g_field.c_str(); }
const char* wr_version(void) { return "0.1.0"; }

int wr_exit_code(wr_status status) {
  if (status == WR_OK) return 0;
  if (status == WR_ERR_VALIDATION) return 1;
  return 2;
}

void wr_string_free(char* s) { std::free(s); }

wr_status wr_config_load(const char* path, wr_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    nlohmann::json j = ex::load_json_file(path);
    ex::resolve(j);
    *out = new wr_config{std::move(j)};
  });
}

wr_status wr_config_parse(const char* json_text, wr_config** out) {
  return guarded([&] {
    require(json_text != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    nlohmann::json j = parse_config_text(json_text);
    ex::resolve(j);
    *out = new wr_config{std::move(j)};
  });
}

void wr_config_free(wr_config* cfg) { delete cfg; }

wr_status wr_config_set(wr_config* cfg, const char* assignment) {
  return guarded([&] {
    require(assignment != nullptr, "null assignment");
    edit_config(cfg, [&](nlohmann::json& j) { ex::apply_override(j, assignment); });
  });
}

wr_status wr_config_set_seeds(wr_config* cfg, const uint64_t* seeds, size_t count) {
  return guarded([&] {
    require(seeds != nullptr || count == 0, "null seed list");
    edit_config(cfg, [&](nlohmann::json& j) {
      nlohmann::json list = nlohmann::json::array();
      for (size_t i = 0; i < count; ++i) list.push_back(seeds[i]);
      j["seeds"] = std::move(list);
    });
  });
}

wr_status wr_config_set_output(wr_config* cfg, const char* dir) {
  return guarded([&] {
    require(dir != nullptr, "null output directory");
    edit_config(cfg, [&](nlohmann::json& j) { j["output"] = dir; });
  });
}

wr_status wr_config_set_scale(wr_config* cfg, double factor) {
  return guarded([&] { edit_config(cfg, [&](nlohmann::json& j) { j["scale"] = factor; }); });
}

wr_status wr_config_resolved_json(const wr_config* cfg, char** out) {
  return guarded([&] {
    require(cfg != nullptr && out != nullptr, "null argument");
    *out = copy_string(ex::to_json(ex::resolve(cfg->raw)).dump(2));
  });
}

wr_status wr_run(const wr_config* cfg, const char* command, char** summary_json) {
  return guarded([&] {
    require(cfg != nullptr && command != nullptr, "null argument");
    if (summary_json != nullptr) *summary_json = nullptr;
    const auto cmd = ex::parse_command(command);
    if (!cmd) throw warmrnn::ValidationError("command", "unknown command '" + std::string(command) + "'");
    const ex::ExperimentConfig c = ex::resolve(cfg->raw);
    const ex::RunSummary s = ex::run(c, *cmd);
    if (summary_json != nullptr) *summary_json = copy_string(s.to_json(c).dump(2));
  });
}

wr_status wr_report(const char* summary_path, char** text) {
  return guarded([&] {
    require(summary_path != nullptr && text != nullptr, "null argument");
    *text = copy_string(ex::report(summary_path));
  });
}

wr_status wr_network_create(const char* cell, size_t input_dim, const size_t* widths, size_t layer_count,
                            size_t output_dim, wr_network** out) {
  return guarded([&] {
    require(cell != nullptr && out != nullptr, "null argument");
    require(widths != nullptr && layer_count > 0, "at least one layer width is required");
    require(input_dim > 0, "input dimension must be positive");
    *out = nullptr;
    warmrnn::rnn::NetworkSpec spec;
    spec.input_dim = input_dim;
    spec.output_dim = output_dim;
    const auto kind = warmrnn::rnn::parse_cell_kind(cell);
    for (size_t l = 0; l < layer_count; ++l) {
      require(widths[l] > 0, "layer widths must be positive");
      spec.layers.push_back({{kind, std::nullopt}, widths[l], std::nullopt});
    }
    *out = new wr_network{warmrnn::rnn::Network(std::move(spec))};
  });
}

void wr_network_free(wr_network* net) { delete net; }

wr_status wr_network_output_dim(const wr_network* net, size_t* out) {
  return guarded([&] {
    require(net != nullptr && out != nullptr, "null argument");
    *out = net->net.output_width();
  });
}

wr_status wr_params_init(const wr_network* net, uint64_t seed, wr_params** out) {
  return guarded([&] {
    require(net != nullptr && out != nullptr, "null argument");
    *out = new wr_params{net->net.init_params(seed)};
  });
}

void wr_params_free(wr_params* params) { delete params; }

wr_status wr_params_scalar_count(const wr_params* params, size_t* out) {
  return guarded([&] {
    require(params != nullptr && out != nullptr, "null argument");
    *out = params->params.scalar_count();
  });
}

wr_status wr_params_hash(const wr_params* params, uint64_t* out) {
  return guarded([&] {
    require(params != nullptr && out != nullptr, "null argument");
    *out = params->params.hash();
  });
}

wr_status wr_params_save(const wr_params* params, const char* path) {
  return guarded([&] {
    require(params != nullptr && path != nullptr, "null argument");
    warmrnn::ad::save_checkpoint(params->params, path);
  });
}

wr_status wr_params_load(const char* path, wr_params** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    *out = new wr_params{warmrnn::ad::load_checkpoint(path)};
  });
}

wr_status wr_network_forward(const wr_network* net, const wr_params* params, const double* inputs, size_t steps,
                             double* output, size_t output_len) {
  return guarded([&] {
    require(net != nullptr && params != nullptr && output != nullptr, "null argument");
    require(inputs != nullptr || steps == 0, "null inputs");
    require(steps > 0, "at least one input step is required");
    const auto& n = net->net;
    require(params->params.size() == n.param_tensor_count(), "parameters do not belong to this network");
    require(output_len == n.output_width(), "output buffer length must equal the network output width");
    const auto bound = params->params.constants();
    const size_t dim = n.spec().input_dim;
    auto state = n.initial_state(1);
    warmrnn::ad::Var top;
    for (size_t t = 0; t < steps; ++t) {
      warmrnn::ad::Tensor x(warmrnn::ad::Shape{1, dim});
      for (size_t k = 0; k < dim; ++k) x[k] = inputs[t * dim + k];
      state = n.step(bound, state, warmrnn::ad::Var(std::move(x)), &top);
    }
    const warmrnn::ad::Tensor y = n.head(bound, top).value();
    for (size_t k = 0; k < output_len; ++k) output[k] = y[k];
  });
}

wr_status wr_vaa_estimate(const wr_network* net, const wr_params* params, const double* sequences, size_t count,
                          size_t steps, size_t stabilization, double epsilon, size_t iterations, uint64_t seed,
                          double* mean) {
  return guarded([&] {
    require(net != nullptr && params != nullptr && sequences != nullptr && mean != nullptr, "null argument");
    require(count > 0 && steps > 0, "at least one non-empty sequence is required");
    const auto& n = net->net;
    require(params->params.size() == n.param_tensor_count(), "parameters do not belong to this network");
    const size_t dim = n.spec().input_dim;
    warmrnn::data::SequenceSet set(dim);
    for (size_t i = 0; i < count; ++i) set.add({sequences + i * steps * dim, steps * dim}, steps);
    warmrnn::Rng rng(seed);
    *mean = warmrnn::vaa::estimate_vaa_mean(n, params->params, set, {stabilization, epsilon, iterations}, count, rng)
                .mean;
  });
}

wr_status wr_tmaze_create(int length, uint64_t seed, wr_tmaze** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    require(length >= 1, "corridor length must be >= 1");
    *out = nullptr;
    warmrnn::tmaze::Config c;
    c.length = length;
    *out = new wr_tmaze{warmrnn::tmaze::Env(c), warmrnn::Rng(seed), {}, false};
  });
}

void wr_tmaze_free(wr_tmaze* env) { delete env; }

wr_status wr_tmaze_reset(wr_tmaze* env, int* observation) {
  return guarded([&] {
    require(env != nullptr && observation != nullptr, "null argument");
    const auto start = env->env.reset(env->rng);
    env->state = start.state;
    env->started = true;
    *observation = static_cast<int>(start.observation);
  });
}

wr_status wr_tmaze_step(wr_tmaze* env, int action, double* reward, int* observation, int* terminal) {
  return guarded([&] {
    require(env != nullptr && reward != nullptr && observation != nullptr && terminal != nullptr, "null argument");
    require(env->started, "reset the maze before stepping");
    require(action >= 0 && action < 4, "action index must lie in 0..3");
    const auto r = env->env.step(env->state, static_cast<std::size_t>(action));
    env->state = r.next;
    *reward = r.reward;
    *observation = static_cast<int>(r.observation);
    *terminal = r.terminal ? 1 : 0;
  });
}

wr_status wr_tmaze_position(const wr_tmaze* env, int* x, int* y, int* layout_up) {
  return guarded([&] {
    require(env != nullptr && x != nullptr && y != nullptr && layout_up != nullptr, "null argument");
    require(env->started, "reset the maze first");
    *x = env->state.x;
    *y = env->state.y;
    *layout_up = env->state.layout == warmrnn::tmaze::Layout::Up ? 1 : 0;
  });
}

wr_status wr_truncation_horizon(int length, size_t* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    require(length >= 1, "corridor length must be >= 1");
    *out = warmrnn::tmaze::truncation_horizon(length);
  });
}

}  // extern "C"
