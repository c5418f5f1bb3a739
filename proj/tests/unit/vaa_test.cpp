#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "warmrnn/errors.hpp"
#include "warmrnn/vaa.hpp"

using namespace warmrnn;
using namespace warmrnn::ad;
using namespace warmrnn::vaa;
using rnn::CellKind;
using rnn::LayerSpec;
using rnn::Network;
using rnn::NetworkSpec;

namespace {

const Dynamics kIdentity = [](const Var& x, const Var&) { return x; };

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = dist(rng);
  return t;
}

Tensor rows_of(const std::vector<std::vector<double>>& rows) {
  Tensor t(Shape{rows.size(), rows[0].size()});
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) t.at(r, c) = rows[r][c];
  return t;
}

double row_distance(const Tensor& t, std::size_t i, std::size_t j, bool squash = false) {
  double s = 0.0;
  for (std::size_t c = 0; c < t.cols(); ++c) {
    double a = t.at(i, c);
    double b = t.at(j, c);
    if (squash) {
      a = std::tanh(a);
      b = std::tanh(b);
    }
    s += (a - b) * (a - b);
  }
  return std::sqrt(s);
}

std::size_t union_find_count(const Tensor& t, double eps) {
  const std::size_t n = t.rows();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (row_distance(t, i, j) <= eps) parent[find(i)] = find(j);
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) roots += find(i) == i;
  return roots;
}

// Points jittered inside a radius `spread` around `clusters` random centres.
Tensor clustered(std::size_t n, std::size_t dim, std::size_t clusters, double spread, std::mt19937_64& rng,
                 double box = 0.5) {
  const Tensor centres = random_tensor({clusters, dim}, rng, -box, box);
  std::uniform_int_distribution<std::size_t> pick(0, clusters - 1);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  Tensor t(Shape{n, dim});
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t c = pick(rng);
    for (std::size_t k = 0; k < dim; ++k)
      t.at(r, k) = centres.at(c, k) + spread * jitter(rng) / std::sqrt(static_cast<double>(dim));
  }
  return t;
}

Tensor permuted(const Tensor& t, std::mt19937_64& rng) {
  std::vector<std::size_t> order(t.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  Tensor out(t.shape());
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) out.at(r, c) = t.at(order[r], c);
  return out;
}

Tensor with_row_appended(const Tensor& t, std::size_t src) {
  Tensor out(Shape{t.rows() + 1, t.cols()});
  std::copy(t.storage().begin(), t.storage().end(), out.storage().begin());
  for (std::size_t c = 0; c < t.cols(); ++c) out.at(t.rows(), c) = t.at(src, c);
  return out;
}

double star(const Tensor& finals, double eps) { return vaa_star_of_finals(Var(finals), eps).value().item(); }

data::SequenceSet random_sequences(std::size_t count, std::size_t dim, std::size_t max_len, std::mt19937_64& rng) {
  data::SequenceSet set(dim);
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t t = len(rng);
    std::vector<double> v(t * dim);
    for (double& x : v) x = normal(rng);
    set.add(v, t);
  }
  return set;
}

}  // namespace

TEST_CASE("truncated VAA of the scalar map tanh(3x)") {
  const Dynamics f = [](const Var& x, const Var&) { return ad::tanh(scale(x, 3.0)); };
  const std::vector<double> start{-0.5, 0.5, 0.7};
  const double v = truncated_vaa(f, rows_of({{-0.5}, {0.5}, {0.7}}), Tensor::row({0.0}), 100, 1e-4);

  // Oracle: iterate the scalar map directly and count attractors pairwise.
  std::vector<double> finals = start;
  for (double& x : finals)
    for (int m = 0; m < 100; ++m) x = std::tanh(3.0 * x);
  CHECK(finals[0] < -0.99);
  CHECK(finals[1] == doctest::Approx(-finals[0]).epsilon(1e-12));
  CHECK(finals[2] == doctest::Approx(finals[1]).epsilon(1e-12));
  double oracle = 0.0;
  for (double a : finals) {
    std::size_t same = 0;
    for (double b : finals) same += std::abs(a - b) <= 1e-4;
    oracle += 1.0 / static_cast<double>(same);
  }
  oracle /= 3.0;
  CHECK(oracle == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(v == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("truncated VAA extremes") {
  std::mt19937_64 rng(1);
  const Tensor u = Tensor::row({0.0, 0.0});
  SUBCASE("monostable") {
    const Tensor x = rows_of({{0.1, 0.2}, {0.1, 0.2}, {0.10000001, 0.2}, {0.1, 0.2}});
    CHECK(truncated_vaa(kIdentity, x, u, 1, 1e-4) == 0.25);
  }
  SUBCASE("all distinct") {
    const Tensor x = rows_of({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}});
    CHECK(truncated_vaa(kIdentity, x, u, 1, 1e-4) == 1.0);
  }
  SUBCASE("threshold ties count as the same attractor") {
    const Tensor x = rows_of({{0.0, 0.0}, {0.5, 0.0}});
    CHECK(truncated_vaa(kIdentity, x, u, 1, 0.5) == 0.5);
  }
  SUBCASE("non-transitive chain uses the pairwise formula") {
    // 0 ~ 1 ~ 2 but 0 !~ 2: counts 1/2 + 1/3 + 1/2.
    const Tensor x = rows_of({{0.0}, {0.75}, {1.5}});
    CHECK(truncated_vaa(kIdentity, x, Tensor::row({0.0}), 1, 1.0) == doctest::Approx((0.5 + 1.0 / 3 + 0.5) / 3));
  }
  SUBCASE("single state") { CHECK(truncated_vaa(kIdentity, rows_of({{3.0, 1.0}}), u, 1, 1e-4) == 1.0); }
}

TEST_CASE("divergent dynamics are reported") {
  const Dynamics f = [](const Var& x, const Var&) { return scale(x, 10.0); };
  CHECK_THROWS_AS(truncated_vaa(f, rows_of({{1.0}, {2.0}}), Tensor::row({0.0}), 400, 1e-4), DivergenceError);
  CHECK_THROWS_AS(vaa_star(f, Var(rows_of({{1.0}, {2.0}})), Var(Tensor::row({0.0})), 400, 1e-4), DivergenceError);
}

TEST_CASE("C* values") {
  const double eps = 1e-3;
  const double a = 0.3;
  SUBCASE("within tolerance") {
    const Tensor x = rows_of({{std::atanh(a)}, {std::atanh(a + 0.5 * eps)}});
    CHECK(star(x, eps) == 0.5);  // C* = 1 for both pairs
  }
  SUBCASE("identical states") {
    const Tensor x = rows_of({{0.2, -0.1}, {0.2, -0.1}});
    const double v = star(x, eps);
    CHECK(std::isfinite(v));
    CHECK(v == 0.5);
  }
  SUBCASE("twice the tolerance") {
    const Tensor x = rows_of({{std::atanh(a)}, {std::atanh(a + 2.0 * eps)}});
    // C* = 1 - eps / (2 eps) = 0.5; VAA* = 1 / (1 + 0.5).
    CHECK(star(x, eps) == doctest::Approx(1.0 / 1.5).epsilon(1e-9));
  }
  SUBCASE("far apart approaches zero from above") {
    double previous = 0.0;
    for (double gap : {0.1, 0.5, 1.0, 1.9}) {
      const Tensor x = rows_of({{std::atanh(-0.95), 0.0}, {std::atanh(-0.95 + gap), 0.0}});
      const double v = star(x, 1e-4);
      const double c = 1.0 / v - 1.0;
      CHECK(c > 0.0);
      CHECK(c == doctest::Approx(1e-4 / gap).epsilon(1e-6));
      CHECK(v > previous);
      previous = v;
    }
  }
}

TEST_CASE("VAA bounds and permutation invariance") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<std::size_t> size(1, 12);
    const std::size_t n = size(rng);
    const std::size_t clusters = std::uniform_int_distribution<std::size_t>(1, n)(rng);
    const double eps = std::pow(10.0, std::uniform_real_distribution<double>(-4.0, -1.0)(rng));
    const Tensor x = clustered(n, 3, clusters, eps * std::uniform_real_distribution<double>(0.0, 3.0)(rng), rng, 1.5);
    const double lo = 1.0 / static_cast<double>(n);
    const double slack = 1e-12;

    const double v = vaa_of_finals(x, eps);
    CHECK(v >= lo - slack);
    CHECK(v <= 1.0);
    const double s = star(x, eps);
    CHECK(s >= lo - slack);
    CHECK(s <= 1.0 + slack);
    bool any_far = false;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) any_far = any_far || row_distance(x, i, j, true) > eps;
    if (any_far) CHECK(s > lo + slack);

    const Tensor y = permuted(x, rng);
    CHECK(vaa_of_finals(y, eps) == v);
    CHECK(star(y, eps) == doctest::Approx(s).epsilon(1e-13));
  }
}

TEST_CASE("attractor count away from the threshold") {
  std::mt19937_64 rng(11);
  std::size_t compared = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 15)(rng);
    const std::size_t clusters = std::uniform_int_distribution<std::size_t>(1, n)(rng);
    const double eps = 1e-2;
    const Tensor x = clustered(n, 2, clusters, 0.2 * eps, rng);
    bool clear = true;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = row_distance(x, i, j);
        clear = clear && (d < eps / 2 || d > 2 * eps);
      }
    if (!clear) continue;
    ++compared;
    const double count = static_cast<double>(n) * truncated_vaa(kIdentity, x, Tensor::row({0.0, 0.0}), 1, eps);
    CHECK(count == doctest::Approx(static_cast<double>(union_find_count(x, eps))).epsilon(1e-12));

    // A duplicated state never adds an attractor.
    const std::size_t src = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    const Tensor z = with_row_appended(x, src);
    CHECK(static_cast<double>(n + 1) * vaa_of_finals(z, eps) <= count + 1e-12);
  }
  CHECK(compared > 200);
}

TEST_CASE("VAA* agrees with truncated VAA when distances are far from the tolerance") {
  std::mt19937_64 rng(13);
  std::size_t compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 20)(rng);
    const std::size_t clusters = std::uniform_int_distribution<std::size_t>(1, n)(rng);
    const double eps = 1e-4;
    const Tensor x = clustered(n, 4, clusters, 0.3 * eps, rng);
    bool clear = true;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (bool squash : {false, true}) {
          const double d = row_distance(x, i, j, squash);
          clear = clear && (d <= eps || d >= 100 * eps);
        }
    if (!clear) continue;
    ++compared;
    CHECK(std::abs(star(x, eps) - vaa_of_finals(x, eps)) < 0.02);
  }
  CHECK(compared > 150);
}

TEST_CASE("VAA* gradients match finite differences") {
  std::mt19937_64 rng(17);
  Network net(NetworkSpec{2, {LayerSpec{{CellKind::GRU, std::nullopt}, 4, std::nullopt}}, 0});
  ParameterSet p = net.init_params(3);
  std::vector<Tensor> values;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (double& v : p[i].storage()) v *= 3.0;
    values.push_back(p[i]);
  }
  const Tensor states = random_tensor({3, 4}, rng);
  const Tensor u = random_tensor({1, 2}, rng);
  for (std::size_t m : {1u, 4u, 10u}) {
    CAPTURE(m);
    const ScalarFn f = [&](std::span<const Var> params) {
      return vaa_star(block_dynamics(net, params, 0, 0), Var(states), Var(u), m, 0.05);
    };
    const GradCheckResult r = gradient_check(f, values, 1e-6, 1e-4);
    CAPTURE(r.analytic);
    CAPTURE(r.numeric);
    CHECK(r.max_relative_error < 1e-4);
  }

  // Through the sampled states as well.
  const data::SequenceSet seqs = random_sequences(3, 2, 6, rng);
  const std::vector<std::size_t> batch{0, 1, 2};
  const ScalarFn g = [&](std::span<const Var> params) {
    Rng local(5);
    const StateSet x = random_hidden_states(net, params, seqs, batch, local);
    return vaa_star(block_dynamics(net, params, 0, 0), x.states[0][0], Var(u), 5, 0.05);
  };
  const GradCheckResult r = gradient_check(g, values, 1e-6, 1e-4);
  CAPTURE(r.analytic);
  CAPTURE(r.numeric);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("random hidden states") {
  std::mt19937_64 gen(19);
  Network net(NetworkSpec{2, {LayerSpec{{CellKind::LSTM, std::nullopt}, 3, std::nullopt},
                              LayerSpec{{CellKind::GRU, std::nullopt}, 4, 0.5}},
                          0});
  const ParameterSet p = net.init_params(2);
  const auto params = p.constants();

  SUBCASE("one sequence of length one") {
    data::SequenceSet one(2);
    one.add(std::vector<double>{0.3, -1.2}, 1);
    Rng rng(1);
    const std::vector<std::size_t> batch{0};
    const StateSet x = random_hidden_states(net, params, one, batch, rng);
    CHECK(x.provenance[0] == std::pair<std::size_t, std::size_t>{0, 1});
    const rnn::HiddenState s = net.step(params, net.initial_state(1), Var(Tensor::row({0.3, -1.2})));
    CHECK(net.flatten(x.states).value() == net.flatten(s).value());
  }

  SUBCASE("rows match a per-sequence unroll") {
    const data::SequenceSet seqs = random_sequences(12, 2, 9, gen);
    std::vector<std::size_t> batch{3, 0, 7, 11, 5, 2};
    Rng rng(4);
    const StateSet x = random_hidden_states(net, params, seqs, batch, rng);
    REQUIRE(x.size() == batch.size());
    const Tensor flat = net.flatten(x.states).value();
    for (std::size_t r = 0; r < batch.size(); ++r) {
      const auto [seq, t] = x.provenance[r];
      CHECK(seq == batch[r]);
      CHECK(t >= 1);
      CHECK(t <= seqs.length(seq));
      rnn::HiddenState s = net.initial_state(1);
      for (std::size_t k = 0; k < t; ++k) {
        const auto step = seqs.step(seq, k);
        s = net.step(params, s, Var(Tensor(Shape{1, 2}, std::vector<double>(step.begin(), step.end()))));
      }
      const Tensor alone = net.flatten(s).value();
      for (std::size_t c = 0; c < flat.cols(); ++c) CHECK(flat.at(r, c) == alone[c]);
    }
  }

  SUBCASE("deterministic under a fixed seed") {
    const data::SequenceSet seqs = random_sequences(10, 2, 7, gen);
    const std::vector<std::size_t> batch{1, 4, 9};
    Rng a(8);
    Rng b(8);
    const StateSet x = random_hidden_states(net, params, seqs, batch, a);
    const StateSet y = random_hidden_states(net, params, seqs, batch, b);
    CHECK(x.provenance == y.provenance);
    CHECK(net.flatten(x.states).value() == net.flatten(y.states).value());
  }

  SUBCASE("zero weights give identical states") {
    ParameterSet z = p;
    for (std::size_t i = 0; i < z.size(); ++i) z[i].fill(0.0);
    const data::SequenceSet seqs = random_sequences(10, 2, 7, gen);
    const std::vector<std::size_t> batch{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    Rng rng(3);
    const Tensor flat = net.flatten(random_hidden_states(net, z.constants(), seqs, batch, rng).states).value();
    for (std::size_t r = 1; r < flat.rows(); ++r)
      for (std::size_t c = 0; c < flat.cols(); ++c) CHECK(flat.at(r, c) == flat.at(0, c));
  }

  SUBCASE("empty batch") {
    const data::SequenceSet seqs = random_sequences(2, 2, 3, gen);
    Rng rng(1);
    CHECK_THROWS_AS(random_hidden_states(net, params, seqs, std::vector<std::size_t>{}, rng), ContractViolation);
  }

  SUBCASE("bptt window limits the gradient path") {
    data::SequenceSet seqs(2);
    std::vector<double> v(2 * 8, 0.5);
    seqs.add(v, 8);
    const std::vector<std::size_t> batch{0};
    for (std::size_t window : {0u, 2u}) {
      Graph graph;
      const auto bound = p.bind(graph);
      Rng rng(2);
      const StateSet x = random_hidden_states(net, bound, seqs, batch, rng, window);
      const Var loss = sum(net.flatten(x.states));
      graph.backward(loss);
      double norm = 0.0;
      for (double g : graph.grad(bound[0]).storage()) norm += g * g;
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("sampling without replacement") {
  Rng rng(5);
  const auto s = sample_without_replacement(50, 20, rng);
  CHECK(s.size() == 20);
  std::vector<std::size_t> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  CHECK(sorted.back() < 50);
  CHECK(sample_without_replacement(7, 7, rng).size() == 7);
  CHECK_THROWS_AS(sample_without_replacement(3, 4, rng), ContractViolation);
}

TEST_CASE("perturbation is standard normal") {
  Rng rng(6);
  const Tensor u = sample_perturbation(20000, rng);
  CHECK(u.rows() == 1);
  double mean = 0.0;
  double sq = 0.0;
  for (double v : u.storage()) {
    mean += v;
    sq += v * v;
  }
  mean /= 20000.0;
  sq /= 20000.0;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(sq - mean * mean - 1.0) < 0.05);
}

TEST_CASE("mean VAA estimation") {
  std::mt19937_64 gen(23);
  Network net(NetworkSpec{3, {LayerSpec{{CellKind::GRU, std::nullopt}, 5, std::nullopt},
                              LayerSpec{{CellKind::MGU, std::nullopt}, 4, std::nullopt}},
                          2});
  const data::SequenceSet seqs = random_sequences(40, 3, 10, gen);

  SUBCASE("unique global fixed point gives 1/|X|") {
    // Zero weights with random biases: every state contracts to the same point.
    ParameterSet p = net.init_params(1);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.name(i).ends_with(".b")) {
        p[i] = random_tensor(p[i].shape(), gen);
      } else {
        p[i].fill(0.0);
      }
    }
    Rng rng(2);
    const Estimate e = estimate_vaa_mean(net, p, seqs, VaaConfig{2000, 1e-4, 4}, 16, rng);
    REQUIRE(e.values.size() == 4);
    for (double v : e.values) CHECK(v == 1.0 / 16.0);
    CHECK(e.mean == 1.0 / 16.0);
    CHECK(e.states == 16);
  }

  SUBCASE("I = 1 is a single truncated VAA") {
    const ParameterSet p = net.init_params(5);
    Rng a(9);
    const Estimate e = estimate_vaa_mean(net, p, seqs, VaaConfig{50, 1e-4, 1}, 10, a);
    REQUIRE(e.values.size() == 1);
    CHECK(e.mean == e.values[0]);

    // Replay the same draws by hand.
    Rng b(9);
    const auto params = p.constants();
    const auto batch = sample_without_replacement(seqs.size(), 10, b);
    const StateSet x = random_hidden_states(net, params, seqs, batch, b);
    const Tensor u = sample_perturbation(3, b);
    CHECK(truncated_vaa(network_dynamics(net, params), net.flatten(x.states).value(), u, 50, 1e-4) == e.mean);
  }

  SUBCASE("same seed, same estimate") {
    const ParameterSet p = net.init_params(5);
    Rng a(10);
    Rng b(10);
    CHECK(estimate_vaa_mean(net, p, seqs, VaaConfig{20, 1e-4, 3}, 8, a).values ==
          estimate_vaa_mean(net, p, seqs, VaaConfig{20, 1e-4, 3}, 8, b).values);
  }

  SUBCASE("invalid configuration") {
    const ParameterSet p = net.init_params(5);
    Rng rng(1);
    CHECK_THROWS_AS(estimate_vaa_mean(net, p, seqs, VaaConfig{0, 1e-4, 1}, 8, rng), ContractViolation);
    CHECK_THROWS_AS(estimate_vaa_mean(net, p, seqs, VaaConfig{1, 0.0, 1}, 8, rng), ContractViolation);
    CHECK_THROWS_AS(estimate_vaa_mean(net, p, data::SequenceSet(3), VaaConfig{}, 8, rng), ContractViolation);
  }
}

TEST_CASE("per-layer probe rows") {
  std::mt19937_64 gen(31);
  const data::SequenceSet seqs = random_sequences(30, 3, 8, gen);
  const Network plain(NetworkSpec{3, {LayerSpec{{CellKind::GRU, std::nullopt}, 5, std::nullopt},
                                      LayerSpec{{CellKind::LSTM, std::nullopt}, 4, std::nullopt}},
                                  2});
  const ParameterSet p = plain.init_params(3);
  Rng rng(4);
  const auto rows = probe_layers(plain, p, seqs, VaaConfig{30, 1e-3, 2}, 12, rng);
  REQUIRE(rows.size() == 6);
  const std::vector<std::string> labels{"network", "0", "1", "network", "0", "1"};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].iteration == i / 3);
    CHECK(rows[i].layer == labels[i]);
    CHECK(rows[i].states == 12);
    CHECK(rows[i].stabilization == 30);
    CHECK(rows[i].epsilon == 1e-3);
    CHECK(rows[i].vaa >= 1.0 / 12.0 - 1e-15);
    CHECK(rows[i].vaa <= 1.0);
    CHECK(rows[i].vaa_star >= 1.0 / 12.0 - 1e-15);
    CHECK(rows[i].vaa_star <= 1.0 + 1e-15);
  }

  // The network row replays estimate_vaa_mean's first draws.
  Rng a(4);
  Rng b(4);
  const auto first = probe_layers(plain, p, seqs, VaaConfig{30, 1e-3, 1}, 12, a);
  const auto params = p.constants();
  const auto batch = sample_without_replacement(seqs.size(), 12, b);
  const StateSet x = random_hidden_states(plain, params, seqs, batch, b);
  const Tensor u = sample_perturbation(3, b);
  CHECK(first[0].vaa == truncated_vaa(network_dynamics(plain, params), plain.flatten(x.states).value(), u, 30, 1e-3));

  const Network split(NetworkSpec{3, {LayerSpec{{CellKind::GRU, std::nullopt}, 6, 0.5}}, 1});
  Rng r2(5);
  const auto srows = probe_layers(split, split.init_params(2), seqs, VaaConfig{10, 1e-4, 1}, 8, r2);
  REQUIRE(srows.size() == 3);
  CHECK(srows[1].layer == "0.0");
  CHECK(srows[2].layer == "0.1");
}
