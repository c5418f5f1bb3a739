#pragma once

#include <array>
#include <cstddef>

#include "warmrnn/random.hpp"

// T-Maze POMDP. Positions are (x, y) with the corridor at y = 0 running from
// x = 0 to x = L and the two terminal cells (L, 1) and (L, -1) past the
// junction. The layout decides which terminal cell holds the treasure.
namespace warmrnn::tmaze {

enum class Layout { Up, Down };

// Fixed orderings used for one-hot encodings.
enum class Observation { Up = 0, Down = 1, Corridor = 2, Junction = 3 };
inline constexpr std::size_t kObservationCount = 4;
inline constexpr std::size_t kActionCount = 4;

struct Action {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Action&, const Action&) = default;
};

// Index order: Right, Up, Left, Down.
inline constexpr std::array<Action, kActionCount> kActions{Action{1, 0}, Action{0, 1}, Action{-1, 0}, Action{0, -1}};
inline constexpr std::size_t kRight = 0;
inline constexpr std::size_t kUp = 1;
inline constexpr std::size_t kLeft = 2;
inline constexpr std::size_t kDown = 3;

// Throws ContractViolation for vectors that are not one of the four moves.
std::size_t action_index(const Action& a);
const Action& action_at(std::size_t index);

inline constexpr double kTreasureReward = 4.0;
inline constexpr double kPenalty = -0.1;

struct Config {
  int length = 1;  // L
  double discount = 0.98;

  void validate() const;
};

struct State {
  Layout layout = Layout::Up;
  int x = 0;
  int y = 0;
  friend bool operator==(const State&, const State&) = default;
};

struct StepResult {
  State next;
  double reward = 0.0;
  Observation observation = Observation::Corridor;
  bool terminal = false;
};

class Env {
 public:
  explicit Env(Config config);

  const Config& config() const noexcept { return config_; }
  int length() const noexcept { return config_.length; }

  bool contains(int x, int y) const noexcept;
  bool terminal(const State& s) const noexcept;
  Observation observe(const State& s) const;

  struct Start {
    State state;
    Observation observation;
  };
  Start reset(Rng& rng) const;
  StepResult step(const State& s, const Action& a) const;
  StepResult step(const State& s, std::size_t action) const { return step(s, action_at(action)); }

 private:
  Config config_;
};

// Right with probability 1/2, each other action with probability 1/6.
inline constexpr std::array<double, kActionCount> kExplorationProbabilities{0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
std::size_t exploration_action(Rng& rng);

// H = ceil(L / (right - left)); requires right > left.
std::size_t truncation_horizon(int length, double right, double left);
std::size_t truncation_horizon(int length);

}  // namespace warmrnn::tmaze
