#include "warmrnn/warmup.hpp"

#include <algorithm>
#include <cmath>

#include "warmrnn/errors.hpp"

namespace warmrnn::warmup {

using ad::Var;

const char* to_string(WarmupOptimizer o) noexcept { return o == WarmupOptimizer::Adam ? "adam" : "sgd"; }

void WarmupConfig::validate() const {
  if (batch_size == 0) throw ContractViolation("warmup batch size must be positive");
  if (!(learning_rate > 0.0)) throw ContractViolation("warmup learning rate must be positive");
  if (!(target >= 0.0 && target <= 1.0)) throw ContractViolation("warmup target k must lie in [0, 1]");
  if (max_stabilization == 0) throw ContractViolation("maximum stabilization period must be >= 1");
  if (!(epsilon > 0.0)) throw ContractViolation("warmup epsilon must be positive");
}

std::size_t max_stabilization_period(std::size_t step, std::size_t max_stabilization, std::size_t increment) {
  if (step < 1) throw ContractViolation("warmup steps are numbered from 1");
  return std::min(max_stabilization, 1 + increment * step);
}

Var warmup_loss(std::span<const Var> per_layer, double target) {
  if (per_layer.empty()) throw ContractViolation("warmup loss needs at least one layer");
  std::vector<Var> terms;
  for (const Var& v : per_layer) terms.push_back(ad::square(ad::shift(v, -target)));
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return ad::scale(total, 1.0 / static_cast<double>(terms.size()));
}

double warmup_loss(std::span<const double> per_layer, double target) {
  if (per_layer.empty()) throw ContractViolation("warmup loss needs at least one layer");
  double s = 0.0;
  for (double v : per_layer) s += (v - target) * (v - target);
  return s / static_cast<double>(per_layer.size());
}

std::vector<std::size_t> warmable_parameters(const rnn::Network& net) {
  if (net.partitioned()) return rnn::warmed_parameter_partition(net).warmed;
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < net.layer_count(); ++l)
    for (const rnn::Block& b : net.blocks(l))
      for (std::size_t k = 0; k < 3; ++k) out.push_back(b.param_index + k);
  return out;
}

WarmupResult run_warmup(const rnn::Network& net, ad::ParameterSet& params, const data::SequenceSet& sequences,
                    const WarmupConfig& config, vaa::Rng& rng) {
  config.validate();
  WarmupResult result;
  if (config.steps == 0) return result;
  if (sequences.empty()) throw ContractViolation("warmup: empty dataset");
  if (config.batch_size > sequences.size()) {
    throw ContractViolation("warmup batch size " + std::to_string(config.batch_size) + " exceeds dataset size " +
                            std::to_string(sequences.size()));
  }

  struct Target {
    std::size_t layer;
    std::size_t block;
  };
  std::vector<Target> targets;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto blocks = net.blocks(l);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (blocks[b].warmed) {
        targets.push_back({l, b});
        result.warmed_layers.push_back(l);
        break;
      }
    }
  }
  if (targets.empty()) return result;
  const std::vector<std::size_t> trainable = warmable_parameters(net);

  train::AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  train::AdamState moments = train::AdamState::zeros_like(params);
  std::size_t adam_steps = 0;

  std::size_t cap = config.max_stabilization;
  for (std::size_t s = 1; s <= config.steps; ++s) {
    ad::Graph graph;
    const std::vector<Var> bound = params.bind(graph);

    const auto batch = vaa::sample_without_replacement(sequences.size(), config.batch_size, rng);
    const vaa::StateSet initial =
        vaa::random_hidden_states(net, bound, sequences, batch, rng, config.bptt_window);
    std::uniform_int_distribution<std::size_t> draw_m(1, max_stabilization_period(s, cap, config.increment));
    const std::size_t m = draw_m(rng);

    std::vector<Var> per_layer;
    for (const Target& t : targets) {
      const Var u(vaa::sample_perturbation(net.layer_input_width(t.layer), rng));
      const vaa::Dynamics f = vaa::block_dynamics(net, bound, t.layer, t.block);
      per_layer.push_back(vaa::vaa_star(f, initial.states[t.layer][t.block], u, m, config.epsilon));
    }
    const Var loss = warmup_loss(per_layer, config.target);
    if (!std::isfinite(loss.value().item())) {
      throw DivergenceError("warmup loss is not finite at step " + std::to_string(s));
    }

    if (loss.recorded()) {
      graph.backward(loss);
      ++adam_steps;
      for (std::size_t idx : trainable) {
        const ad::Tensor g = graph.grad(bound[idx]);
        if (!g.all_finite()) {
          throw DivergenceError("non-finite warmup gradient for " + params.name(idx) + " at step " +
                                std::to_string(s));
        }
        if (config.optimizer == WarmupOptimizer::Adam) {
          train::adam_update(params[idx], g, moments.m[idx], moments.v[idx], adam_steps, adam);
          continue;
        }
        auto& p = params[idx].storage();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= config.learning_rate * g[i];
      }
    }

    TraceRow row;
    row.step = s;
    row.sampled_stabilization = m;
    for (const Var& v : per_layer) row.vaa_star.push_back(v.value().item());
    row.loss = loss.value().item();
    result.trace.push_back(std::move(row));

    if (config.grow_max_stabilization) cap += config.increment;
  }
  return result;
}

}  // namespace warmrnn::warmup
