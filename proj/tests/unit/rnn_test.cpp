#include <cmath>
#include <random>

#include "doctest.h"
#include "warmrnn/errors.hpp"
#include "warmrnn/rnn.hpp"

using namespace warmrnn;
using namespace warmrnn::ad;
using namespace warmrnn::rnn;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = dist(rng);
  return t;
}

Network single(CellKind kind, std::size_t in, std::size_t width, std::size_t out = 0) {
  return Network(NetworkSpec{in, {LayerSpec{CellType{kind, std::nullopt}, width, std::nullopt}}, out});
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double distance(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

const CellKind kKinds[] = {CellKind::GRU, CellKind::LSTM, CellKind::MGU};

}  // namespace

TEST_CASE("cell kind names round trip") {
  for (CellKind k : kKinds) CHECK(parse_cell_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_cell_kind("rnn"), ContractViolation);
  CHECK_THROWS_AS((CellType{CellKind::GRU, 10u}.validate()), ContractViolation);
  CHECK_THROWS_AS((CellType{CellKind::LSTM, 1u}.validate()), ContractViolation);
}

TEST_CASE("init_params is seeded") {
  Network net(NetworkSpec{3, {LayerSpec{{CellKind::LSTM, 50u}, 6, std::nullopt}, LayerSpec{{}, 5, 0.4}}, 2});
  CHECK(net.init_params(7) == net.init_params(7));
  CHECK(net.init_params(7).hash() != net.init_params(8).hash());
}

TEST_CASE("GRU parameter count") {
  const std::size_t expected = 3 * (256 * (256 + 2) + 256);
  CHECK(expected == 198912);
  CHECK(expected == 3 * 256 * 258 + 768);
  CHECK(block_param_count(CellKind::GRU, 2, 256) == expected);
  CHECK(single(CellKind::GRU, 2, 256).init_params(1).scalar_count() == expected);
}

TEST_CASE("initial weights stay within fan-in bounds and biases are zero") {
  Network net = single(CellKind::GRU, 3, 5, 2);
  const ParameterSet p = net.init_params(3);
  const double rec = 1.0 / std::sqrt(8.0);
  for (double v : p[0].storage()) CHECK(std::abs(v) <= rec);
  for (double v : p[1].storage()) CHECK(std::abs(v) <= rec);
  for (double v : p[2].storage()) CHECK(v == 0.0);
  for (double v : p[3].storage()) CHECK(std::abs(v) <= 1.0 / std::sqrt(5.0));
}

TEST_CASE("chrono LSTM biases") {
  const std::size_t w = 64;
  Network net(NetworkSpec{2, {LayerSpec{{CellKind::LSTM, 600u}, w, std::nullopt}}, 0});
  const ParameterSet p = net.init_params(11);
  const Tensor& b = p[2];
  REQUIRE(b.size() == 4 * w);
  const double hi = std::log(599.0);
  double lowest = hi;
  double highest = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    const double bf = b[w + i];
    CHECK(bf >= 0.0);
    CHECK(bf <= hi);
    CHECK(b[i] == -bf);
    CHECK(b[2 * w + i] == 0.0);
    CHECK(b[3 * w + i] == 0.0);
    lowest = std::min(lowest, bf);
    highest = std::max(highest, bf);
  }
  CHECK(highest - lowest > 1.0);
}

TEST_CASE("GRU with zero parameters halves the state") {
  Network net = single(CellKind::GRU, 3, 4);
  ParameterSet p = net.init_params(0);
  for (std::size_t i = 0; i < p.size(); ++i) p[i].fill(0.0);
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({2, 4}, rng);
  const Tensor u = random_tensor({2, 3}, rng, -5.0, 5.0);
  const auto params = p.constants();
  const Var next = net.block_step(params, net.blocks(0)[0], Var(x), Var(u));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(next.value()[i] == 0.5 * x[i]);
}

TEST_CASE("saturated LSTM gates keep the cell state") {
  const std::size_t w = 6;
  Network net = single(CellKind::LSTM, 3, w);
  ParameterSet p = net.init_params(2);
  Tensor& b = p[2];
  for (std::size_t i = 0; i < w; ++i) {
    b[i] = -20.0;
    b[w + i] = 20.0;
  }
  std::mt19937_64 rng(9);
  Tensor state = random_tensor({1, 2 * w}, rng, -0.9, 0.9);
  const auto params = p.constants();
  for (int t = 0; t < 50; ++t) {
    const Tensor u = random_tensor({1, 3}, rng);
    const Tensor next = net.block_step(params, net.blocks(0)[0], Var(state), Var(u)).value();
    for (std::size_t i = 0; i < w; ++i) CHECK(std::abs(next.at(0, w + i) - state.at(0, w + i)) < 1e-6);
    state = next;
  }
}

TEST_CASE("width mismatches are contract violations") {
  Network net = single(CellKind::MGU, 3, 4);
  const auto params = net.init_params(1).constants();
  CHECK_THROWS_AS(net.block_step(params, net.blocks(0)[0], Var(Tensor::matrix(1, 4)), Var(Tensor::matrix(1, 2))),
                  ContractViolation);
  CHECK_THROWS_AS(net.block_step(params, net.blocks(0)[0], Var(Tensor::matrix(1, 5)), Var(Tensor::matrix(1, 3))),
                  ContractViolation);
}

TEST_CASE("states stay inside the gate ranges") {
  std::mt19937_64 rng(21);
  for (CellKind kind : kKinds) {
    Network net = single(kind, 2, 5);
    ParameterSet p = net.init_params(4);
    // Large weights push the gates towards saturation.
    for (std::size_t i = 0; i < 2; ++i)
      for (double& v : p[i].storage()) v *= 8.0;
    const auto params = p.constants();
    HiddenState s = net.initial_state(3);
    for (int t = 0; t < 40; ++t) {
      s = net.step(params, s, Var(random_tensor({3, 2}, rng, -3.0, 3.0)));
      const Tensor& v = s[0][0].value();
      const std::size_t h = 5;
      for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < h; ++c) {
          CHECK(v.at(r, c) > -1.0);
          CHECK(v.at(r, c) < 1.0);
        }
    }
    CAPTURE(to_string(kind));
  }
}

TEST_CASE("iterating under a constant input reaches a fixed point") {
  std::mt19937_64 rng(31);
  for (CellKind kind : kKinds) {
    CAPTURE(to_string(kind));
    Network net = single(kind, 3, 4);
    const auto params = net.init_params(6).constants();
    const Block& block = net.blocks(0)[0];
    const Var u(random_tensor({1, 3}, rng, -2.0, 2.0));
    Tensor x = random_tensor({1, block.state_width()}, rng);
    bool converged = false;
    for (int k = 0; k < 10000 && !converged; ++k) {
      Tensor next = net.block_step(params, block, Var(x), u).value();
      converged = distance(next, x) < 1e-10;
      x = std::move(next);
    }
    REQUIRE(converged);
    CHECK(distance(net.block_step(params, block, Var(x), u).value(), x) < 1e-8);

    // Keep iterating to machine precision.
    double prev = 1.0;
    for (int k = 0; k < 10000; ++k) {
      Tensor next = net.block_step(params, block, Var(x), u).value();
      const double d = distance(next, x);
      x = std::move(next);
      if (d == 0.0 || d >= prev) break;
      prev = d;
    }
    CHECK(max_abs_diff(net.block_step(params, block, Var(x), u).value(), x) < 1e-12);
  }
}

TEST_CASE("network step composes layers") {
  std::mt19937_64 rng(41);
  Network one = single(CellKind::GRU, 3, 4);
  const auto p1 = one.init_params(1).constants();
  const Tensor u = random_tensor({2, 3}, rng);
  const HiddenState s0 = one.initial_state(2);
  Var top;
  const HiddenState s1 = one.step(p1, s0, Var(u), &top);
  CHECK(s1[0][0].value() == one.block_step(p1, one.blocks(0)[0], s0[0][0], Var(u)).value());
  CHECK(one.head(p1, top).value() == s1[0][0].value());

  Network two(NetworkSpec{3, {LayerSpec{{CellKind::LSTM, std::nullopt}, 4, std::nullopt},
                              LayerSpec{{CellKind::MGU, std::nullopt}, 5, std::nullopt}},
                          0});
  const auto p2 = two.init_params(2).constants();
  HiddenState s = two.initial_state(2);
  for (int t = 0; t < 3; ++t) {
    const Var in(random_tensor({2, 3}, rng));
    const Var lower = two.block_step(p2, two.blocks(0)[0], s[0][0], in);
    const Var upper = two.block_step(p2, two.blocks(1)[0], s[1][0], Network::block_output(two.blocks(0)[0], lower));
    Var out;
    s = two.step(p2, s, in, &out);
    CHECK(s[0][0].value() == lower.value());
    CHECK(s[1][0].value() == upper.value());
    CHECK(two.head(p2, out).value() == upper.value());
  }
}

TEST_CASE("double layer halves are parallel and concatenated") {
  std::mt19937_64 rng(51);
  for (CellKind kind : kKinds) {
    CAPTURE(to_string(kind));
    Network net(NetworkSpec{3, {LayerSpec{{kind, std::nullopt}, 8, 0.5}, LayerSpec{{kind, std::nullopt}, 6, 0.5}}, 0});
    REQUIRE(net.blocks(0).size() == 2);
    CHECK(net.blocks(0)[0].width == 4);
    CHECK(net.blocks(0)[1].width == 4);
    CHECK_FALSE(net.blocks(0)[0].warmed);
    CHECK(net.blocks(0)[1].warmed);
    ParameterSet p = net.init_params(3);
    // Give both halves of every layer the same parameters.
    for (std::size_t l = 0; l < 2; ++l)
      for (std::size_t k = 0; k < 3; ++k) p[net.blocks(l)[1].param_index + k] = p[net.blocks(l)[0].param_index + k];
    const auto params = p.constants();
    HiddenState s = net.initial_state(2);
    for (int t = 0; t < 5; ++t) {
      s = net.step(params, s, Var(random_tensor({2, 3}, rng)));
      for (std::size_t l = 0; l < 2; ++l) {
        const Var out = net.layer_output(s, l);
        CHECK(out.cols() == net.blocks(l)[0].width + net.blocks(l)[1].width);
        CHECK(out.cols() == net.layer_output_width(l));
        CHECK(s[l][0].value() == s[l][1].value());
      }
    }
  }
}

TEST_CASE("warmed parameter partition") {
  Network plain = single(CellKind::GRU, 2, 4);
  CHECK_THROWS_AS(warmed_parameter_partition(plain), ContractViolation);

  Network all(NetworkSpec{2, {LayerSpec{{}, 4, 1.0}, LayerSpec{{}, 3, 1.0}}, 0});
  Partition pa = warmed_parameter_partition(all);
  CHECK(pa.warmed.size() == all.param_tensor_count());
  CHECK(pa.frozen.empty());

  Network none(NetworkSpec{2, {LayerSpec{{}, 4, 0.0}, LayerSpec{{}, 3, 0.0}}, 0});
  Partition pn = warmed_parameter_partition(none);
  CHECK(pn.warmed.empty());
  CHECK(pn.frozen.size() == none.param_tensor_count());

  Network half(NetworkSpec{2, {LayerSpec{{}, 256, 0.5}}, 3});
  const ParameterSet p = half.init_params(1);
  Partition ph = warmed_parameter_partition(half);
  std::size_t warmed = 0;
  std::size_t frozen_recurrent = 0;
  for (std::size_t i : ph.warmed) warmed += p[i].size();
  for (std::size_t i : ph.frozen)
    if (!half.head_index() || i < *half.head_index()) frozen_recurrent += p[i].size();
  CHECK(warmed == block_param_count(CellKind::GRU, 2, 128));
  CHECK(frozen_recurrent == block_param_count(CellKind::GRU, 2, 128));

  std::vector<bool> seen(half.param_tensor_count(), false);
  for (std::size_t i : ph.warmed) seen[i] = true;
  for (std::size_t i : ph.frozen) {
    CHECK_FALSE(seen[i]);
    seen[i] = true;
  }
  for (bool s : seen) CHECK(s);
}

TEST_CASE("unroll") {
  std::mt19937_64 rng(61);
  Network net(NetworkSpec{2, {LayerSpec{{CellKind::GRU, std::nullopt}, 4, std::nullopt},
                              LayerSpec{{CellKind::LSTM, std::nullopt}, 3, std::nullopt}},
                          0});
  const auto params = net.init_params(5).constants();

  SUBCASE("length one is a single step") {
    const Var u(random_tensor({2, 2}, rng));
    const Unrolled r = unroll(net, params, std::vector<Var>{u}, net.initial_state(2));
    REQUIRE(r.states.size() == 1);
    const HiddenState s = net.step(params, net.initial_state(2), u);
    CHECK(net.flatten(r.states[0]).value() == net.flatten(s).value());
  }

  SUBCASE("unroll then constant input composes") {
    std::vector<Var> seq;
    for (int t = 0; t < 6; ++t) seq.emplace_back(random_tensor({2, 2}, rng));
    const Var u(random_tensor({1, 2}, rng));
    const Var u2 = Var(Tensor(Shape{2, 2}, {u.value()[0], u.value()[1], u.value()[0], u.value()[1]}));
    const Unrolled a = unroll(net, params, seq, net.initial_state(2));
    HiddenState s = a.states.back();
    for (int m = 0; m < 4; ++m) s = net.step(params, s, u);
    std::vector<Var> longer = seq;
    for (int m = 0; m < 4; ++m) longer.push_back(u2);
    const Unrolled b = unroll(net, params, longer, net.initial_state(2));
    CHECK(net.flatten(b.states.back()).value() == net.flatten(s).value());
  }

  SUBCASE("deterministic") {
    std::vector<Var> seq;
    for (int t = 0; t < 5; ++t) seq.emplace_back(random_tensor({3, 2}, rng));
    const Unrolled a = unroll(net, params, seq, net.initial_state(3));
    const Unrolled b = unroll(net, net.init_params(5).constants(), seq, net.initial_state(3));
    for (std::size_t t = 0; t < seq.size(); ++t) CHECK(a.outputs[t].value() == b.outputs[t].value());
  }

  SUBCASE("empty sequence") {
    CHECK_THROWS_AS(unroll(net, params, std::vector<Var>{}, net.initial_state(1)), ContractViolation);
  }
}

TEST_CASE("first input influences the loss at T = 5") {
  const std::size_t w = 4;
  Network net = single(CellKind::GRU, w, w);
  ParameterSet p = net.init_params(8);
  // Identity-scale weights: W and the candidate block of U are identities.
  for (std::size_t k = 0; k < 2; ++k) p[k].fill(0.0);
  for (std::size_t i = 0; i < w; ++i) {
    for (std::size_t g = 0; g < 3; ++g) p[0].at(i, g * w + i) = 1.0;
    p[1].at(i, 2 * w + i) = 1.0;
  }
  std::mt19937_64 rng(71);
  std::vector<Tensor> inputs;
  for (int t = 0; t < 5; ++t) inputs.push_back(random_tensor({1, w}, rng));

  auto loss_of = [&](const Tensor& first, Graph* g, Var* leaf) {
    const auto params = p.constants();
    std::vector<Var> seq;
    seq.push_back(g ? g->leaf(first) : Var(first));
    if (leaf) *leaf = seq[0];
    for (int t = 1; t < 5; ++t) seq.emplace_back(inputs[t]);
    const Unrolled r = unroll(net, params, seq, net.initial_state(1));
    return sum(square(r.outputs.back()));
  };

  Graph g;
  Var leaf;
  const Var loss = loss_of(inputs[0], &g, &leaf);
  g.backward(loss);
  const Tensor grad = g.grad(leaf);
  double norm = 0.0;
  for (double v : grad.storage()) norm += v * v;
  CHECK(std::sqrt(norm) > 1e-6);

  const double h = 1e-6;
  for (std::size_t i = 0; i < w; ++i) {
    Tensor plus = inputs[0];
    Tensor minus = inputs[0];
    plus[i] += h;
    minus[i] -= h;
    const double numeric =
        (loss_of(plus, nullptr, nullptr).value().item() - loss_of(minus, nullptr, nullptr).value().item()) / (2 * h);
    CHECK(std::abs(numeric - grad[i]) < 1e-7);
  }
}

TEST_CASE("cell gradients match finite differences") {
  std::mt19937_64 rng(81);
  for (CellKind kind : kKinds) {
    CAPTURE(to_string(kind));
    Network net(NetworkSpec{3, {LayerSpec{{kind, std::nullopt}, 4, std::nullopt}}, 2});
    ParameterSet p = net.init_params(12);
    std::vector<Tensor> values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (double& v : p[i].storage()) v = 3.0 * v + (i % 3 == 2 ? 0.3 : 0.0);
      values.push_back(p[i]);
    }
    HiddenState start = net.unflatten(Var(random_tensor({2, net.state_width()}, rng)));
    std::vector<Var> seq;
    for (int t = 0; t < 6; ++t) seq.emplace_back(random_tensor({2, 3}, rng, -2.0, 2.0));
    const Tensor targets = random_tensor({2, 2}, rng);
    const ScalarFn f = [&](std::span<const Var> params) {
      const Unrolled r = unroll(net, params, seq, start);
      return sum(square(sub(net.head(params, r.outputs.back()), Var(targets))));
    };
    const GradCheckResult res = gradient_check(f, values, 1e-6, 1e-5);
    CAPTURE(res.analytic);
    CAPTURE(res.numeric);
    CAPTURE(res.worst_tensor);
    CHECK(res.max_relative_error < 1e-5);
  }
}

TEST_CASE("flatten and unflatten invert each other") {
  std::mt19937_64 rng(91);
  Network net(NetworkSpec{2, {LayerSpec{{CellKind::LSTM, std::nullopt}, 4, 0.5}, LayerSpec{{}, 3, std::nullopt}}, 0});
  CHECK(net.state_width() == 8 + 3);
  const Var flat(random_tensor({2, net.state_width()}, rng));
  CHECK(net.flatten(net.unflatten(flat)).value() == flat.value());
}
