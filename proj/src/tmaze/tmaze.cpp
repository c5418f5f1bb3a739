#include "warmrnn/tmaze.hpp"

#include <cmath>
#include <string>

#include "warmrnn/errors.hpp"

namespace warmrnn::tmaze {

std::size_t action_index(const Action& a) {
  for (std::size_t i = 0; i < kActionCount; ++i) {
    if (kActions[i] == a) return i;
  }
  throw ContractViolation("malformed action (" + std::to_string(a.dx) + ", " + std::to_string(a.dy) + ")");
}

const Action& action_at(std::size_t index) {
  if (index >= kActionCount) throw ContractViolation("action index " + std::to_string(index) + " out of range");
  return kActions[index];
}

void Config::validate() const {
  if (length < 1) throw ContractViolation("maze length must be >= 1");
  if (!(discount >= 0.0 && discount <= 1.0)) throw ContractViolation("discount must lie in [0, 1]");
}

Env::Env(Config config) : config_(config) { config_.validate(); }

bool Env::contains(int x, int y) const noexcept {
  if (y == 0) return x >= 0 && x <= config_.length;
  return x == config_.length && (y == 1 || y == -1);
}

bool Env::terminal(const State& s) const noexcept { return s.x == config_.length && s.y != 0; }

Observation Env::observe(const State& s) const {
  if (!contains(s.x, s.y)) throw ContractViolation("state outside the maze");
  if (s.x == config_.length) return Observation::Junction;
  if (s.x == 0) return s.layout == Layout::Up ? Observation::Up : Observation::Down;
  return Observation::Corridor;
}

Env::Start Env::reset(Rng& rng) const {
  std::bernoulli_distribution coin(0.5);
  State s{coin(rng) ? Layout::Up : Layout::Down, 0, 0};
  return {s, observe(s)};
}

StepResult Env::step(const State& s, const Action& a) const {
  action_index(a);
  if (!contains(s.x, s.y)) throw ContractViolation("state outside the maze");
  StepResult r;
  if (terminal(s)) {
    r.next = s;
    r.observation = observe(s);
    r.terminal = true;
    return r;
  }
  const int nx = s.x + a.dx;
  const int ny = s.y + a.dy;
  r.next = contains(nx, ny) ? State{s.layout, nx, ny} : s;
  r.observation = observe(r.next);
  r.terminal = terminal(r.next);
  if (r.terminal) {
    const int treasure = s.layout == Layout::Up ? 1 : -1;
    r.reward = r.next.y == treasure ? kTreasureReward : kPenalty;
  } else {
    r.reward = r.next == s ? kPenalty : 0.0;
  }
  return r;
}

std::size_t exploration_action(Rng& rng) {
  std::discrete_distribution<std::size_t> d(kExplorationProbabilities.begin(), kExplorationProbabilities.end());
  return d(rng);
}

std::size_t truncation_horizon(int length, double right, double left) {
  if (length < 1) throw ContractViolation("maze length must be >= 1");
  if (!(right > left)) throw ContractViolation("truncation horizon needs right > left");
  // Slack absorbs rounding in right - left (1/2 - 1/6 is not exact).
  const double h = static_cast<double>(length) / (right - left);
  return static_cast<std::size_t>(std::ceil(h - 1e-9 * h));
}

std::size_t truncation_horizon(int length) {
  return truncation_horizon(length, kExplorationProbabilities[kRight], kExplorationProbabilities[kLeft]);
}

}  // namespace warmrnn::tmaze
