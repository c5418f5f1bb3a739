#include <cstdlib>
#include <fstream>

#include "warmrnn/errors.hpp"
#include "warmrnn/experiment.hpp"

namespace warmrnn::experiment {

using ad::Tensor;
using ad::Var;
namespace fs = std::filesystem;

namespace {

bool supervised(Task t) { return t == Task::Copy || t == Task::Denoise || t == Task::PMnist || t == Task::PLMnist; }

std::size_t task_output_dim(Task t) {
  switch (t) {
    case Task::Copy:
    case Task::Denoise:
      return 1;
    case Task::PMnist:
    case Task::PLMnist:
      return 10;
    case Task::TMaze:
      return tmaze::kActionCount;
    default:
      return 1;
  }
}

data::MnistData first_images(data::MnistData d, std::size_t limit) {
  if (limit == 0 || limit >= d.size()) return d;
  d.labels.resize(limit);
  d.pixels.resize(limit * d.rows * d.cols);
  return d;
}

fs::path mnist_dir(const DataConfig& d) {
  if (!d.directory.empty()) return d.directory;
  if (const char* env = std::getenv(kDataDirEnv); env != nullptr && *env != '\0') return env;
  throw IoError(std::string("MNIST directory not configured: set data.directory or ") + kDataDirEnv);
}

// Observation/action histories of exploration-policy episodes, at least
// `transitions` steps in total.
data::SequenceSet exploration_sequences(const ExperimentConfig& c, std::uint64_t seed) {
  const tmaze::Env env(c.maze);
  const std::size_t horizon = c.rl.horizon ? c.rl.horizon : tmaze::truncation_horizon(c.maze.length);
  const auto want = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(c.rl.prefill_fraction * static_cast<double>(c.rl.buffer_capacity))));
  Rng rng(mix_seed(seed, 12));
  std::vector<std::shared_ptr<const drqn::History>> episodes;
  std::size_t total = 0;
  while (total < want) {
    auto h = std::make_shared<drqn::History>();
    auto start = env.reset(rng);
    tmaze::State s = start.state;
    h->observations.push_back(start.observation);
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t a = tmaze::exploration_action(rng);
      const auto r = env.step(s, a);
      h->actions.push_back(a);
      h->observations.push_back(r.observation);
      s = r.next;
      ++total;
      if (r.terminal) break;
    }
    episodes.push_back(std::move(h));
  }
  return drqn::histories_to_sequences(episodes);
}

Task data_task(const ExperimentConfig& c) { return c.task == Task::VaaProbe ? c.data.source : c.task; }

data::SequenceSet input_sequences(const ExperimentConfig& c, std::uint64_t seed) {
  const Task t = data_task(c);
  if (t == Task::TMaze) return exploration_sequences(c, seed);
  if (!supervised(t)) throw ValidationError("task", "this command needs a dataset");
  return build_task_data(c, t, seed).train.inputs;
}

struct SeedContext {
  const ExperimentConfig& config;
  std::uint64_t seed;
  fs::path dir;
  SeedOutcome outcome;
};

warmup::WarmupResult warm(const ExperimentConfig& c, const rnn::Network& net, ad::ParameterSet& params,
                          const data::SequenceSet& seqs, std::uint64_t seed, const fs::path& dir) {
  warmup::WarmupConfig w = c.warmup;
  w.batch_size = std::min(w.batch_size, seqs.size());
  Rng rng(mix_seed(seed, 21));
  warmup::WarmupResult r = warmup::run_warmup(net, params, seqs, w, rng);
  if (!r.trace.empty()) write_csv(dir / "warmup.csv", kWarmupHeader, warmup_rows(r.trace, r.warmed_layers));
  return r;
}

void record_warmup(SeedOutcome& o, const warmup::WarmupResult& r) {
  if (r.trace.empty()) return;
  double s = 0.0;
  for (double v : r.trace.back().vaa_star) s += v;
  o.metrics["warmup_final_vaa_star"] = s / static_cast<double>(r.trace.back().vaa_star.size());
  o.metrics["warmup_final_loss"] = r.trace.back().loss;
}

double probe_vaa(const ExperimentConfig& c, const rnn::Network& net, const ad::ParameterSet& params,
                 const data::SequenceSet& seqs, std::uint64_t stream) {
  Rng rng(stream);
  return vaa::estimate_vaa_mean(net, params, seqs, c.probe.vaa, std::min(c.probe.states, seqs.size()), rng).mean;
}

void run_warmup_command(SeedContext& ctx) {
  const auto& c = ctx.config;
  const data::SequenceSet seqs = input_sequences(c, ctx.seed);
  const rnn::Network net(network_spec(c, seqs.input_dim(), task_output_dim(data_task(c))));
  ad::ParameterSet params = net.init_params(mix_seed(ctx.seed, 20));
  ctx.outcome.metrics["vaa_before"] = probe_vaa(c, net, params, seqs, mix_seed(ctx.seed, 30));
  try {
    record_warmup(ctx.outcome, warm(c, net, params, seqs, ctx.seed, ctx.dir));
    ctx.outcome.metrics["vaa_after"] = probe_vaa(c, net, params, seqs, mix_seed(ctx.seed, 31));
  } catch (const DivergenceError&) {
    ctx.outcome.status = "diverged";
  }
  ad::save_checkpoint(params, ctx.dir / "params.ckpt");
}

void run_train_command(SeedContext& ctx) {
  const auto& c = ctx.config;
  if (!supervised(c.task)) throw ValidationError("task", "train needs copy, denoise, pmnist or plmnist");
  const TaskData data = build_task_data(c, c.task, ctx.seed);
  const rnn::Network net(network_spec(c, data.train.inputs.input_dim(), data::output_dim(data.train.loss)));
  ad::ParameterSet params = net.init_params(mix_seed(ctx.seed, 20));
  if (c.warmup_mode != WarmupMode::None) {
    try {
      record_warmup(ctx.outcome, warm(c, net, params, data.train.inputs, ctx.seed, ctx.dir));
    } catch (const DivergenceError&) {
      ctx.outcome.status = "diverged";
      ad::save_checkpoint(params, ctx.dir / "params.ckpt");
      return;
    }
  }
  train::TrainConfig tc = c.train;
  tc.seed = ctx.seed;
  std::vector<train::TraceRow> rows;
  train::TrainResult result;
  try {
    result = train::train_supervised(net, params, data.train, tc, &data.test,
                                     [&](const train::TraceRow& r) { rows.push_back(r); });
  } catch (...) {
    if (!rows.empty()) write_csv(ctx.dir / "metrics.csv", kTrainHeader, train_rows(rows));
    throw;
  }
  write_csv(ctx.dir / "metrics.csv", kTrainHeader, train_rows(result.trace));
  ad::save_checkpoint(params, ctx.dir / "params.ckpt");

  auto& m = ctx.outcome.metrics;
  if (result.diverged) ctx.outcome.status = "diverged";
  m["epochs_completed"] = static_cast<double>(result.epochs_completed);
  for (auto it = result.trace.rbegin(); it != result.trace.rend(); ++it) {
    if (it->split == "train") {
      m["final_train_loss"] = it->loss;
      break;
    }
  }
  if (result.final_validation_loss) m["final_validation_loss"] = *result.final_validation_loss;
  if (result.final_test_loss) m["final_test_loss"] = *result.final_test_loss;
  if (result.final_test_accuracy) m["final_test_accuracy"] = *result.final_test_accuracy;
  if (result.final_vaa) m["final_vaa"] = *result.final_vaa;
}

void run_rl_command(SeedContext& ctx) {
  const auto& c = ctx.config;
  if (c.task != Task::TMaze) throw ValidationError("task", "rl needs the tmaze task");
  const rnn::Network net(network_spec(c, drqn::kInputDim, tmaze::kActionCount));
  drqn::DrqnConfig rc = c.rl;
  rc.seed = ctx.seed;
  if (c.warmup_mode != WarmupMode::None) rc.warmup = c.warmup;
  std::vector<drqn::EpisodeRow> rows;
  drqn::DrqnResult result;
  try {
    result = drqn::train_drqn(c.maze, net, net.init_params(mix_seed(ctx.seed, 20)), rc,
                              [&](const drqn::EpisodeRow& r, const drqn::Learner&) { rows.push_back(r); });
  } catch (...) {
    if (!rows.empty()) write_csv(ctx.dir / "metrics.csv", kRlHeader, rl_rows(rows));
    throw;
  }
  if (result.warmup) {
    if (!result.warmup->trace.empty()) {
      write_csv(ctx.dir / "warmup.csv", kWarmupHeader,
                warmup_rows(result.warmup->trace, result.warmup->warmed_layers));
    }
    record_warmup(ctx.outcome, *result.warmup);
  }
  if (!result.trace.empty()) write_csv(ctx.dir / "metrics.csv", kRlHeader, rl_rows(result.trace));
  ad::save_checkpoint(result.params, ctx.dir / "params.ckpt");

  auto& m = ctx.outcome.metrics;
  if (result.diverged) ctx.outcome.status = "diverged";
  m["episodes_completed"] = static_cast<double>(result.episodes_completed);
  m["reached_optimal"] = result.optimal_episode ? 1.0 : 0.0;
  if (result.optimal_episode) m["optimal_episode"] = static_cast<double>(*result.optimal_episode);
  if (!result.trace.empty()) m["final_smoothed_return"] = result.trace.back().smoothed_return;
  for (auto it = result.trace.rbegin(); it != result.trace.rend(); ++it) {
    if (it->eval_return) {
      m["final_eval_return"] = *it->eval_return;
      break;
    }
  }
  for (auto it = result.trace.rbegin(); it != result.trace.rend(); ++it) {
    if (it->vaa) {
      m["final_vaa"] = *it->vaa;
      break;
    }
  }
}

void run_probe_command(SeedContext& ctx) {
  const auto& c = ctx.config;
  const data::SequenceSet seqs = input_sequences(c, ctx.seed);
  const rnn::Network net(network_spec(c, seqs.input_dim(), task_output_dim(data_task(c))));
  ad::ParameterSet params = net.init_params(mix_seed(ctx.seed, 20));
  if (c.warmup_mode != WarmupMode::None) record_warmup(ctx.outcome, warm(c, net, params, seqs, ctx.seed, ctx.dir));
  Rng rng(mix_seed(ctx.seed, 30));
  const auto probe = vaa::probe_layers(net, params, seqs, c.probe.vaa, std::min(c.probe.states, seqs.size()), rng);
  std::vector<std::vector<std::string>> rows;
  std::vector<double> network;
  for (const vaa::ProbeRow& r : probe) {
    rows.push_back({std::to_string(r.iteration), r.layer, format_number(r.vaa), format_number(r.vaa_star),
                    std::to_string(r.states), std::to_string(r.stabilization), format_number(r.epsilon)});
    if (r.layer == "network") network.push_back(r.vaa);
  }
  write_csv(ctx.dir / "metrics.csv", kProbeHeader, rows);
  auto& m = ctx.outcome.metrics;
  m["vaa_mean"] = std::accumulate(network.begin(), network.end(), 0.0) / static_cast<double>(network.size());
  m["vaa_min"] = *std::min_element(network.begin(), network.end());
  m["vaa_max"] = *std::max_element(network.begin(), network.end());
  m["states"] = static_cast<double>(probe.front().states);
}

void run_gradcheck_command(SeedContext& ctx) {
  const auto rows = run_gradchecks(ctx.seed);
  std::vector<std::vector<std::string>> table;
  double worst = 0.0;
  bool all = true;
  for (const auto& r : rows) {
    table.push_back({r.name, format_number(r.max_relative_error), std::to_string(r.checked), format_number(r.max_abs_gradient),
                     r.passed ? "1" : "0"});
    worst = std::max(worst, r.max_relative_error);
    all = all && r.passed;
  }
  write_csv(ctx.dir / "metrics.csv", {"check", "max_relative_error", "checked", "max_abs_gradient", "passed"}, table);
  ctx.outcome.metrics["max_relative_error"] = worst;
  ctx.outcome.metrics["all_passed"] = all ? 1.0 : 0.0;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("failed while writing " + path.string());
}

}  // namespace

TaskData build_task_data(const ExperimentConfig& c, Task task, std::uint64_t seed) {
  const DataConfig& d = c.data;
  switch (task) {
    case Task::Copy:
      return {data::gen_copy_first_input({d.length, d.train_samples, mix_seed(seed, 10)}),
              data::gen_copy_first_input({d.length, d.test_samples, mix_seed(seed, 11)})};
    case Task::Denoise:
      return {data::gen_denoising({d.length, d.forgetting, d.train_samples, mix_seed(seed, 10)}),
              data::gen_denoising({d.length, d.forgetting, d.test_samples, mix_seed(seed, 11)})};
    case Task::PMnist:
    case Task::PLMnist: {
      const fs::path dir = mnist_dir(d);
      const auto train = first_images(
          data::load_mnist_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte"), d.train_limit);
      const auto test = first_images(
          data::load_mnist_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"), d.test_limit);
      data::PermutedMnistSpec spec;
      spec.mode = task == Task::PMnist ? data::MnistMode::Pixel : data::MnistMode::Line;
      spec.permutation_seed = d.permutation_seed;
      spec.black_lines = task == Task::PLMnist ? d.black_lines : 0;
      return {data::make_permuted_sequences(train, spec), data::make_permuted_sequences(test, spec)};
    }
    default:
      throw ValidationError("task", std::string(to_string(task)) + " has no supervised dataset");
  }
}

rnn::NetworkSpec network_spec(const ExperimentConfig& c, std::size_t input_dim, std::size_t output_dim) {
  rnn::NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.output_dim = output_dim;
  for (std::size_t w : c.network.layers) {
    spec.layers.push_back(rnn::LayerSpec{{c.network.cell, c.network.chrono_tmax}, w, c.network.warmed_fraction});
  }
  return spec;
}

RunSummary run(const ExperimentConfig& config, Command command) {
  if (command == Command::Rl && config.task != Task::TMaze) throw ValidationError("task", "rl needs the tmaze task");
  if (command == Command::Train && !supervised(config.task)) {
    throw ValidationError("task", "train needs copy, denoise, pmnist or plmnist");
  }
  if ((command == Command::Warmup || command == Command::VaaProbe) && config.task == Task::GradCheck) {
    throw ValidationError("task", "gradcheck has no dataset");
  }
  std::error_code ec;
  fs::create_directories(config.output, ec);
  if (ec) throw IoError("cannot create output directory " + config.output.string() + ": " + ec.message());
  write_text(config.output / "config.json", to_json(config).dump(2) + "\n");

  RunSummary summary;
  summary.command = command;
  auto flush = [&] {
    summary.metrics.clear();
    std::map<std::string, std::vector<double>> values;
    for (const auto& s : summary.seeds)
      for (const auto& [k, v] : s.metrics)
        if (std::isfinite(v)) values[k].push_back(v);
    for (const auto& [k, v] : values) summary.metrics[k] = summarize(v);
    write_text(config.output / "summary.json", summary.to_json(config).dump(2) + "\n");
  };

  for (std::uint64_t seed : config.seeds) {
    SeedContext ctx{config, seed, config.output / ("seed-" + std::to_string(seed)), {}};
    ctx.outcome.seed = seed;
    fs::create_directories(ctx.dir, ec);
    if (ec) throw IoError("cannot create " + ctx.dir.string() + ": " + ec.message());
    try {
      switch (command) {
        case Command::Warmup:
          run_warmup_command(ctx);
          break;
        case Command::Train:
          run_train_command(ctx);
          break;
        case Command::Rl:
          run_rl_command(ctx);
          break;
        case Command::VaaProbe:
          run_probe_command(ctx);
          break;
        case Command::GradCheck:
          run_gradcheck_command(ctx);
          break;
      }
    } catch (...) {
      flush();
      throw;
    }
    summary.seeds.push_back(std::move(ctx.outcome));
    flush();
  }
  return summary;
}

}  // namespace warmrnn::experiment
