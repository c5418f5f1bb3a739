#include "warmrnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "warmrnn/errors.hpp"

namespace warmrnn::train {

using ad::Tensor;
using ad::Var;

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractViolation("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ContractViolation("adam beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ContractViolation("adam beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ContractViolation("adam epsilon must be positive");
}

AdamState AdamState::zeros_like(const ad::ParameterSet& params) {
  AdamState s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m.emplace_back(params[i].shape());
    s.v.emplace_back(params[i].shape());
  }
  return s;
}

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::size_t t, const AdamConfig& config) {
  if (t < 1) throw ContractViolation("adam step index starts at 1");
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw ContractViolation("adam: gradient/moment shapes do not match the parameter");
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  auto& p = param.storage();
  auto& mm = m.storage();
  auto& vv = v.storage();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double g = grad[i];
    mm[i] = config.beta1 * mm[i] + (1.0 - config.beta1) * g;
    vv[i] = config.beta2 * vv[i] + (1.0 - config.beta2) * g * g;
    p[i] -= config.learning_rate * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + config.epsilon);
  }
}

void adam_step(ad::ParameterSet& params, std::span<const Tensor> grads, AdamState& state, const AdamConfig& config,
               std::span<const std::size_t> which) {
  if (grads.size() != params.size()) throw ContractViolation("adam: one gradient per parameter tensor expected");
  if (state.m.size() != params.size()) throw ContractViolation("adam: moment state does not match parameters");
  std::vector<std::size_t> all;
  if (which.empty()) {
    all.resize(params.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    which = all;
  }
  for (std::size_t i : which) {
    if (!grads[i].all_finite()) throw DivergenceError("non-finite gradient for " + params.name(i));
  }
  ++state.step;
  for (std::size_t i : which) adam_update(params[i], grads[i], state.m[i], state.v[i], state.step, config);
}

void TrainConfig::validate() const {
  adam.validate();
  if (batch_size == 0) throw ContractViolation("batch size must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ContractViolation("validation fraction must lie in [0, 1)");
  }
  if (clip_norm < 0.0) throw ContractViolation("clip norm must be >= 0");
  if (probe.period > 0) {
    probe.vaa.validate();
    if (probe.states == 0) throw ContractViolation("probe state count must be positive");
  }
}

std::vector<Var> forward_scored(const rnn::Network& net, std::span<const Var> params, const data::Dataset& dataset,
                                std::span<const std::size_t> batch, std::size_t scored) {
  if (batch.empty()) throw ContractViolation("empty batch");
  const std::size_t length = dataset.inputs.length(batch[0]);
  for (std::size_t i : batch) {
    if (dataset.inputs.length(i) != length) throw ContractViolation("batch sequences must share one length");
  }
  if (scored > length) throw ContractViolation("sequence shorter than the scored window");
  rnn::HiddenState state = net.initial_state(batch.size());
  std::vector<Var> outputs;
  for (std::size_t t = 0; t < length; ++t) {
    Var top;
    state = net.step(params, state, Var(dataset.inputs.batch_step(batch, t)), &top);
    if (t + scored >= length) outputs.push_back(net.head(params, top));
  }
  return outputs;
}

EvalResult evaluate(const rnn::Network& net, const ad::ParameterSet& params, const data::Dataset& dataset,
                    std::size_t batch_size) {
  if (dataset.size() == 0) throw ContractViolation("evaluate: empty dataset");
  if (batch_size == 0) throw ContractViolation("evaluate: batch size must be positive");
  const auto bound = params.constants();
  const std::size_t scored = data::scored_steps(dataset.loss);
  double total = 0.0;
  std::size_t hits = 0;
  std::vector<std::size_t> batch;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    batch.resize(std::min(batch_size, dataset.size() - start));
    std::iota(batch.begin(), batch.end(), start);
    const auto outs = forward_scored(net, bound, dataset, batch, scored);
    std::vector<Tensor> values;
    for (const Var& o : outs) values.push_back(o.value());
    const auto s = data::score_batch(dataset.loss, values, dataset.batch_targets(batch));
    for (double l : s.losses) total += l;
    for (bool c : s.correct) hits += c;
  }
  EvalResult r;
  r.loss = total / static_cast<double>(dataset.size());
  if (dataset.classification()) r.accuracy = static_cast<double>(hits) / static_cast<double>(dataset.size());
  return r;
}

std::pair<data::Dataset, data::Dataset> split_validation(const data::Dataset& dataset, double fraction,
                                                         std::uint64_t seed) {
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto held = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(dataset.size())));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  std::sort(val.begin(), val.end());
  std::sort(rest.begin(), rest.end());
  return {dataset.subset(rest), dataset.subset(val)};
}

namespace {

double clip(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.storage()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (Tensor& g : grads)
      for (double& v : g.storage()) v *= f;
  }
  return norm;
}

}  // namespace

TrainResult train_supervised(const rnn::Network& net, ad::ParameterSet& params, const data::Dataset& train,
                             const TrainConfig& config, const data::Dataset* test,
                             const std::function<void(const TraceRow&)>& on_row) {
  config.validate();
  if (train.size() == 0) throw ContractViolation("training set is empty");
  if (net.output_width() != data::output_dim(train.loss)) {
    throw ContractViolation("network output width " + std::to_string(net.output_width()) + " does not match " +
                            std::string(data::to_string(train.loss)));
  }
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    if (!config.record_wall_time) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  TrainResult result;
  auto emit = [&](TraceRow row) {
    row.wall_time_s = elapsed();
    if (on_row) on_row(row);
    result.trace.push_back(std::move(row));
  };

  auto [fit, validation] = split_validation(train, config.validation_fraction, mix_seed(config.seed, 1));
  if (fit.size() == 0) throw ContractViolation("no training samples left after the validation split");
  Rng shuffle_rng(mix_seed(config.seed, 2));
  Rng probe_rng(mix_seed(config.seed, 3));
  AdamState adam = AdamState::zeros_like(params);
  const std::size_t scored = data::scored_steps(train.loss);

  auto probe = [&]() -> std::optional<double> {
    const std::size_t n = std::min(config.probe.states, fit.size());
    return vaa::estimate_vaa_mean(net, params, fit.inputs, config.probe.vaa, n, probe_rng).mean;
  };
  auto probe_due = [&](std::size_t epoch) { return config.probe.period > 0 && epoch % config.probe.period == 0; };

  auto validation_rows = [&](std::size_t epoch) {
    if (validation.size() == 0) return;
    const EvalResult v = evaluate(net, params, validation);
    result.final_validation_loss = v.loss;
    emit(TraceRow{epoch, "validation", v.loss, v.accuracy, std::nullopt, 0.0});
  };

  {
    const EvalResult tr = evaluate(net, params, fit);
    std::optional<double> v;
    if (probe_due(0)) result.final_vaa = v = probe();
    emit(TraceRow{0, "train", tr.loss, tr.accuracy, v, 0.0});
    validation_rows(0);
  }

  std::vector<std::size_t> order(fit.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    std::size_t seen = 0;
    try {
      for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
        const std::span<const std::size_t> batch(order.data() + b, std::min(config.batch_size, order.size() - b));
        ad::Graph graph;
        const auto bound = params.bind(graph);
        const auto outs = forward_scored(net, bound, fit, batch, scored);
        const Tensor targets = fit.batch_targets(batch);
        const Var loss = data::task_loss(fit.loss, outs, targets);
        const double lv = loss.value().item();
        if (!std::isfinite(lv)) {
          throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
        }
        if (fit.classification()) {
          std::vector<Tensor> values{outs[0].value()};
          for (bool c : data::score_batch(fit.loss, values, targets).correct) hits += c;
        }
        loss_sum += lv * static_cast<double>(batch.size());
        seen += batch.size();
        graph.backward(loss);
        std::vector<Tensor> grads;
        for (const Var& p : bound) grads.push_back(graph.grad(p));
        clip(grads, config.clip_norm);
        adam_step(params, grads, adam, config.adam);
      }
    } catch (const DivergenceError& e) {
      result.diverged = true;
      result.divergence = e.what();
      break;
    }
    std::optional<double> v;
    if (probe_due(epoch)) {
      try {
        result.final_vaa = v = probe();
      } catch (const DivergenceError& e) {
        result.diverged = true;
        result.divergence = e.what();
      }
    }
    std::optional<double> acc;
    if (fit.classification()) acc = static_cast<double>(hits) / static_cast<double>(seen);
    emit(TraceRow{epoch, "train", loss_sum / static_cast<double>(seen), acc, v, 0.0});
    validation_rows(epoch);
    result.epochs_completed = epoch;
    if (result.diverged) break;
  }

  if (test != nullptr && test->size() > 0 && !result.diverged) {
    const EvalResult t = evaluate(net, params, *test);
    result.final_test_loss = t.loss;
    result.final_test_accuracy = t.accuracy;
    emit(TraceRow{result.epochs_completed, "test", t.loss, t.accuracy, std::nullopt, 0.0});
  }
  return result;
}

}  // namespace warmrnn::train
