#include "warmrnn/vaa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "warmrnn/errors.hpp"

namespace warmrnn::vaa {

using ad::Tensor;
using ad::Var;

void VaaConfig::validate() const {
  if (stabilization < 1) throw ContractViolation("stabilization period M must be >= 1");
  if (!(epsilon > 0.0)) throw ContractViolation("VAA tolerance epsilon must be positive");
  if (iterations < 1) throw ContractViolation("VAA iteration count must be >= 1");
}

Dynamics network_dynamics(const rnn::Network& net, std::span<const Var> params) {
  return [&net, params](const Var& state, const Var& input) {
    return net.flatten(net.step(params, net.unflatten(state), input));
  };
}

Dynamics block_dynamics(const rnn::Network& net, std::span<const Var> params, std::size_t layer,
                        std::size_t block) {
  const rnn::Block& b = net.blocks(layer)[block];
  return [&net, params, b](const Var& state, const Var& input) { return net.block_step(params, b, state, input); };
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count, Rng& rng) {
  if (count > population) {
    throw ContractViolation("cannot sample " + std::to_string(count) + " items without replacement from " +
                            std::to_string(population));
  }
  std::vector<std::size_t> pool(population);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

StateSet random_hidden_states(const rnn::Network& net, std::span<const Var> params,
                              const data::SequenceSet& sequences, std::span<const std::size_t> batch,
                              Rng& rng, std::size_t bptt_window) {
  if (batch.empty()) throw ContractViolation("random_hidden_states: empty batch");
  if (sequences.input_dim() != net.spec().input_dim) {
    throw ContractViolation("sequence input width does not match the network input");
  }
  StateSet out;
  std::size_t longest = 0;
  for (std::size_t i : batch) {
    const std::size_t len = sequences.length(i);
    std::uniform_int_distribution<std::size_t> draw(1, len);
    const std::size_t t = draw(rng);
    out.provenance.emplace_back(i, t);
    longest = std::max(longest, t);
  }

  rnn::HiddenState state = net.initial_state(batch.size());
  std::vector<double> active(batch.size());
  for (std::size_t k = 1; k <= longest; ++k) {
    if (bptt_window > 0 && k + bptt_window == longest + 1) {
      for (auto& layer : state)
        for (Var& v : layer) v = ad::detach(v);
    }
    const Var input(sequences.batch_step(batch, k - 1));
    rnn::HiddenState next = net.step(params, state, input);
    for (std::size_t r = 0; r < batch.size(); ++r) active[r] = k <= out.provenance[r].second ? 1.0 : 0.0;
    state = rnn::select_rows(active, next, state);
  }
  out.states = std::move(state);
  return out;
}

Tensor sample_perturbation(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor u = Tensor::matrix(1, dim);
  for (double& v : u.storage()) v = normal(rng);
  return u;
}

Var stabilize(const Dynamics& f, Var states, const Var& input, std::size_t stabilization) {
  for (std::size_t m = 0; m < stabilization; ++m) states = f(states, input);
  if (!states.value().all_finite()) {
    throw DivergenceError("non-finite hidden state after " + std::to_string(stabilization) +
                          " stabilization steps (divergent dynamics)");
  }
  return states;
}

double vaa_of_finals(const Tensor& finals, double epsilon) {
  const std::size_t n = finals.rows();
  const std::size_t d = finals.cols();
  if (n == 0) throw ContractViolation("VAA needs at least one state");
  std::vector<std::size_t> same(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = finals.at(i, c) - finals.at(j, c);
        s += diff * diff;
      }
      if (std::sqrt(s) <= epsilon) {
        ++same[i];
        if (j != i) ++same[j];
      }
    }
  }
  // Terms are grouped by count, so a clean cluster of c states adds exactly
  // c / c = 1 and the result does not depend on row order.
  std::sort(same.begin(), same.end());
  double total = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t k = i;
    while (k < n && same[k] == same[i]) ++k;
    total += static_cast<double>(k - i) / static_cast<double>(same[i]);
    i = k;
  }
  return total / static_cast<double>(n);
}

double truncated_vaa(const Dynamics& f, const Tensor& states, const Tensor& input, std::size_t stabilization,
                     double epsilon) {
  if (states.rows() == 0) throw ContractViolation("VAA needs at least one state");
  const Var finals = stabilize(f, Var(states), Var(input), stabilization);
  return vaa_of_finals(finals.value(), epsilon);
}

Var vaa_star_of_finals(const Var& finals, double epsilon) {
  const std::size_t n = finals.rows();
  if (n == 0) throw ContractViolation("VAA* needs at least one state");
  const Var squashed = ad::tanh(finals);

  std::vector<std::size_t> left(n * n);
  std::vector<std::size_t> right(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      left[i * n + j] = i;
      right[i * n + j] = j;
    }
  const Var dist = ad::norm_last(ad::sub(ad::gather_rows(squashed, left), ad::gather_rows(squashed, right)));

  // Zero distances get a unit denominator; their numerator max(0, -eps) is 0,
  // so C* = 1 without forming 0/0.
  Tensor guard(ad::Shape{n * n, 1});
  for (std::size_t k = 0; k < n * n; ++k) guard[k] = dist.value()[k] == 0.0 ? 1.0 : 0.0;
  const Var excess = ad::max_with(ad::shift(dist, -epsilon), 0.0);
  const Var similarity = ad::one_minus(ad::div(excess, ad::add(dist, Var(std::move(guard)))));

  const Var denominators = ad::sum_last(ad::reshape(similarity, {n, n}));
  return ad::mean(ad::div(Var(Tensor(ad::Shape{n, 1}, 1.0)), denominators));
}

Var vaa_star(const Dynamics& f, const Var& states, const Var& input, std::size_t stabilization, double epsilon) {
  return vaa_star_of_finals(stabilize(f, states, input, stabilization), epsilon);
}

Estimate estimate_vaa_mean(const rnn::Network& net, const ad::ParameterSet& params,
                           const data::SequenceSet& sequences, const VaaConfig& config, std::size_t batch_size,
                           Rng& rng) {
  config.validate();
  if (sequences.empty()) throw ContractViolation("estimate_vaa_mean: empty dataset");
  if (batch_size == 0) throw ContractViolation("estimate_vaa_mean: batch size must be positive");
  const std::vector<Var> bound = params.constants();
  const Dynamics f = network_dynamics(net, bound);
  Estimate est;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto batch = sample_without_replacement(sequences.size(), std::min(batch_size, sequences.size()), rng);
    const StateSet initial = random_hidden_states(net, bound, sequences, batch, rng);
    const Tensor u = sample_perturbation(net.spec().input_dim, rng);
    const double v =
        truncated_vaa(f, net.flatten(initial.states).value(), u, config.stabilization, config.epsilon);
    est.values.push_back(v);
    est.states = initial.size();
  }
  est.mean = std::accumulate(est.values.begin(), est.values.end(), 0.0) / static_cast<double>(est.values.size());
  return est;
}

std::vector<ProbeRow> probe_layers(const rnn::Network& net, const ad::ParameterSet& params,
                                   const data::SequenceSet& sequences, const VaaConfig& config,
                                   std::size_t batch_size, Rng& rng) {
  config.validate();
  if (sequences.empty()) throw ContractViolation("probe_layers: empty dataset");
  if (batch_size == 0) throw ContractViolation("probe_layers: batch size must be positive");
  const std::vector<Var> bound = params.constants();
  std::vector<ProbeRow> rows;
  auto emit = [&](std::size_t it, std::string label, const Var& finals) {
    ProbeRow r;
    r.iteration = it;
    r.layer = std::move(label);
    r.vaa = vaa_of_finals(finals.value(), config.epsilon);
    r.vaa_star = vaa_star_of_finals(finals, config.epsilon).value().item();
    r.states = finals.rows();
    r.stabilization = config.stabilization;
    r.epsilon = config.epsilon;
    rows.push_back(std::move(r));
  };
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto batch = sample_without_replacement(sequences.size(), std::min(batch_size, sequences.size()), rng);
    const StateSet initial = random_hidden_states(net, bound, sequences, batch, rng);
    const Var u(sample_perturbation(net.spec().input_dim, rng));
    emit(it, "network",
         stabilize(network_dynamics(net, bound), net.flatten(initial.states), u, config.stabilization));
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      const std::size_t blocks = net.blocks(l).size();
      for (std::size_t b = 0; b < blocks; ++b) {
        const Var ul(sample_perturbation(net.layer_input_width(l), rng));
        std::string label = std::to_string(l);
        if (blocks > 1) label += "." + std::to_string(b);
        emit(it, std::move(label),
             stabilize(block_dynamics(net, bound, l, b), initial.states[l][b], ul, config.stabilization));
      }
    }
  }
  return rows;
}

}  // namespace warmrnn::vaa
