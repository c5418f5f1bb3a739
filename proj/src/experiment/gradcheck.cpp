#include <algorithm>
#include <cmath>
#include <random>

#include "warmrnn/experiment.hpp"

namespace warmrnn::experiment {

using ad::Tensor;
using ad::Var;

namespace {

Tensor uniform(ad::Shape shape, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = dist(rng);
  return t;
}

// Default initialisation stretched so that gates leave saturation-free but
// non-trivial regimes; tiny gradients would make the relative error
// meaningless.
std::vector<Tensor> conditioned(ad::ParameterSet& p, bool shift_biases) {
  std::vector<Tensor> values;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (double& v : p[i].storage()) v = 3.0 * v + (shift_biases && i % 3 == 2 ? 0.3 : 0.0);
    values.push_back(p[i]);
  }
  return values;
}

GradcheckRow to_row(std::string name, const ad::GradCheckResult& r) {
  return {std::move(name), r.max_relative_error, r.checked, r.max_abs_gradient, r.passed};
}

}  // namespace

std::vector<GradcheckRow> run_gradchecks(std::uint64_t seed) {
  constexpr double kStep = 1e-6;
  std::vector<GradcheckRow> rows;
  Rng rng(mix_seed(seed, 40));
  for (rnn::CellKind kind : {rnn::CellKind::GRU, rnn::CellKind::LSTM, rnn::CellKind::MGU}) {
    const rnn::Network net(rnn::NetworkSpec{3, {rnn::LayerSpec{{kind, std::nullopt}, 4, std::nullopt}}, 2});
    ad::ParameterSet p = net.init_params(mix_seed(seed, 41 + static_cast<std::uint64_t>(kind)));
    const std::vector<Tensor> values = conditioned(p, true);
    const rnn::HiddenState start = net.unflatten(Var(uniform({2, net.state_width()}, rng, -1.0, 1.0)));
    std::vector<Var> seq;
    for (int t = 0; t < 6; ++t) seq.emplace_back(uniform({2, 3}, rng, -2.0, 2.0));
    const Tensor targets = uniform({2, 2}, rng, -1.0, 1.0);
    const ad::ScalarFn f = [&](std::span<const Var> params) {
      const rnn::Unrolled r = rnn::unroll(net, params, seq, start);
      return ad::sum(ad::square(ad::sub(net.head(params, r.outputs.back()), Var(targets))));
    };
    rows.push_back(to_row(std::string(rnn::to_string(kind)), ad::gradient_check(f, values, kStep, kGradcheckTolerance)));
  }

  const rnn::Network net(rnn::NetworkSpec{2, {rnn::LayerSpec{{rnn::CellKind::GRU, std::nullopt}, 4, std::nullopt}}, 0});
  ad::ParameterSet p = net.init_params(mix_seed(seed, 45));
  const std::vector<Tensor> values = conditioned(p, false);
  rng.seed(mix_seed(seed, 46));
  const Tensor states = uniform({3, 4}, rng, -1.0, 1.0);
  const Tensor u = uniform({1, 2}, rng, -1.0, 1.0);
  // eps: half the median squashed pairwise distance.
  const std::vector<Var> fixed = p.constants();
  const Tensor finals = ad::tanh(vaa::stabilize(vaa::block_dynamics(net, fixed, 0, 0), Var(states), Var(u), 8)).value();
  std::vector<double> dist;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < 4; ++k) sq += (finals.at(i, k) - finals.at(j, k)) * (finals.at(i, k) - finals.at(j, k));
      dist.push_back(std::sqrt(sq));
    }
  std::sort(dist.begin(), dist.end());
  const double eps = 0.5 * dist[1];
  const ad::ScalarFn g = [&](std::span<const Var> params) {
    return vaa::vaa_star(vaa::block_dynamics(net, params, 0, 0), Var(states), Var(u), 8, eps);
  };
  rows.push_back(to_row("VAA*", ad::gradient_check(g, values, kStep, kGradcheckTolerance)));
  return rows;
}

}  // namespace warmrnn::experiment
