#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "warmrnn/parameters.hpp"
#include "warmrnn/random.hpp"
#include "warmrnn/rnn.hpp"
#include "warmrnn/sequences.hpp"
#include "warmrnn/tmaze.hpp"
#include "warmrnn/trainer.hpp"
#include "warmrnn/vaa.hpp"
#include "warmrnn/warmup.hpp"

// Recurrent Q-learning on the T-Maze.
//
// A history eta_{0:t} = (o_0, a_0, o_1, ..., a_{t-1}, o_t) is fed to the
// network as x_0 = (0, onehot(o_0)) and x_k = (onehot(a_{k-1}), onehot(o_k)),
// so the network input width is 8: four action columns then four observation
// columns. The head output (width 4) holds Q(eta, a) in action index order.
namespace warmrnn::drqn {

inline constexpr std::size_t kInputDim = tmaze::kActionCount + tmaze::kObservationCount;

struct History {
  std::vector<tmaze::Observation> observations;  // o_0 .. o_t
  std::vector<std::size_t> actions;              // a_0 .. a_{t-1}

  std::size_t steps() const noexcept { return observations.size(); }
};

// Network input row for one step; no previous action at step 0.
void encode_step(std::optional<std::size_t> previous_action, tmaze::Observation obs, std::span<double> out);
// (t+1) x 8 inputs of the prefix eta_{0:t}.
std::vector<double> encode_history(const History& h, std::size_t t);
data::SequenceSet histories_to_sequences(std::span<const std::shared_ptr<const History>> histories);

// One transition (eta_{0:t}, a_t, r_t, o_{t+1}). The episode history is
// shared; eta_{0:t+1} is its prefix of length t + 2.
struct Transition {
  std::shared_ptr<const History> episode;
  std::size_t t = 0;
  std::size_t action = 0;
  double reward = 0.0;
  bool terminal = false;   // o_{t+1} comes from a terminal state
  bool truncated = false;  // episode cut at the horizon after this step

  tmaze::Observation next_observation() const { return episode->observations.at(t + 1); }
};

// Fixed-capacity FIFO ring.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition tr);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool full() const noexcept { return items_.size() == capacity_; }
  // i = 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;
  // Uniform draws with replacement.
  std::vector<const Transition*> sample(std::size_t count, Rng& rng) const;
  // Distinct episodes with at least one stored transition, oldest first.
  std::vector<std::shared_ptr<const History>> episodes() const;

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // next slot to overwrite once full
};

// Q-values of the full history via a fresh unroll (1 x 4).
ad::Tensor q_forward(const rnn::Network& net, const ad::ParameterSet& params, const History& h);

// Incremental evaluation: feed one step at a time, get Q of the prefix.
class QTracker {
 public:
  QTracker(const rnn::Network& net, const ad::ParameterSet& params);
  ad::Tensor observe(std::optional<std::size_t> previous_action, tmaze::Observation obs);

 private:
  const rnn::Network* net_;
  std::vector<ad::Var> params_;
  rnn::HiddenState state_;
};

// Lowest index wins ties.
std::size_t greedy_action(const ad::Tensor& q);
// Exploration action with probability epsilon, greedy otherwise.
std::size_t epsilon_greedy(const ad::Tensor& q, double epsilon, Rng& rng);

// y = r when terminal, r + gamma * max_next_q otherwise (truncation
// bootstraps).
double td_target(double reward, bool terminal, double max_next_q, double discount);

class Learner {
 public:
  Learner(const rnn::Network& net, ad::ParameterSet online, train::AdamConfig adam, double discount);

  const ad::ParameterSet& online() const noexcept { return online_; }
  ad::ParameterSet& online() noexcept { return online_; }
  const ad::ParameterSet& target() const noexcept { return target_; }
  void sync_target() { target_ = online_; }
  std::size_t updates() const noexcept { return adam_state_.step; }

  // TD targets from the target network.
  std::vector<double> targets(std::span<const Transition* const> batch) const;
  // Online Q(eta_{0:t}, a_t) for each transition.
  std::vector<double> predictions(std::span<const Transition* const> batch) const;
  // One Adam step on mean_i (y_i - Q(eta_i, a_i))^2; returns the loss.
  // Throws DivergenceError on non-finite loss or gradients.
  double update(std::span<const Transition* const> batch);

 private:
  const rnn::Network* net_;
  ad::ParameterSet online_;
  ad::ParameterSet target_;
  train::AdamConfig adam_;
  train::AdamState adam_state_;
  double discount_;
};

struct ProbeConfig {
  std::size_t period = 0;  // episodes between probes; 0 disables
  std::size_t states = 100;
  vaa::VaaConfig vaa{10000, 1e-4, 1};
};

struct DrqnConfig {
  std::size_t buffer_capacity = 50000;  // N
  std::size_t target_period = 25;       // C
  std::size_t episodes = 3000;          // E
  std::size_t horizon = 0;              // H; 0 derives it from the maze length
  std::size_t updates_per_episode = 10; // I
  double epsilon = 0.1;
  train::AdamConfig adam{};
  std::size_t batch_size = 32;          // B
  double prefill_fraction = 0.1;
  std::optional<warmup::WarmupConfig> warmup;
  std::size_t eval_period = 1;          // greedy evaluation every k episodes; 0 disables
  std::size_t smoothing_window = 50;
  std::size_t optimal_streak = 50;
  bool stop_when_optimal = false;
  ProbeConfig probe;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpisodeRow {
  std::size_t episode = 0;
  double episode_return = 0.0;
  double smoothed_return = 0.0;
  std::optional<double> eval_return;
  std::optional<double> vaa;
  double epsilon = 0.0;
  std::size_t buffer_size = 0;
};

struct DrqnResult {
  ad::ParameterSet params;
  std::vector<EpisodeRow> trace;
  std::optional<warmup::WarmupResult> warmup;
  // First episode of the first run of `optimal_streak` consecutive greedy
  // evaluations that all returned the treasure reward on both layouts.
  std::optional<std::size_t> optimal_episode;
  bool diverged = false;
  std::string divergence;
  std::size_t episodes_completed = 0;
};

// Undiscounted return of the greedy policy, averaged over both layouts.
double greedy_return(const rnn::Network& net, const ad::ParameterSet& params, const tmaze::Env& env,
                     std::size_t horizon);

// Checks the network shape: input width 8, linear head of width 4.
void check_network(const rnn::Network& net);

using EpisodeObserver = std::function<void(const EpisodeRow&, const Learner&)>;

DrqnResult train_drqn(const tmaze::Config& maze, const rnn::Network& net, ad::ParameterSet params,
                      const DrqnConfig& config, const EpisodeObserver& observer = {});

}  // namespace warmrnn::drqn
