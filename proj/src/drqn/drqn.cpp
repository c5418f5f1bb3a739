#include "warmrnn/drqn.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_set>

#include "warmrnn/errors.hpp"

namespace warmrnn::drqn {

using ad::Tensor;
using ad::Var;
using tmaze::Observation;

void encode_step(std::optional<std::size_t> previous_action, Observation obs, std::span<double> out) {
  if (out.size() != kInputDim) throw ContractViolation("encoded step must have width 8");
  std::fill(out.begin(), out.end(), 0.0);
  if (previous_action) out[tmaze::action_index(tmaze::action_at(*previous_action))] = 1.0;
  out[tmaze::kActionCount + static_cast<std::size_t>(obs)] = 1.0;
}

std::vector<double> encode_history(const History& h, std::size_t t) {
  if (t >= h.observations.size()) throw ContractViolation("history prefix longer than the history");
  if (h.actions.size() + 1 < h.observations.size()) throw ContractViolation("history is missing actions");
  std::vector<double> out((t + 1) * kInputDim);
  for (std::size_t k = 0; k <= t; ++k) {
    const std::optional<std::size_t> prev = k == 0 ? std::nullopt : std::optional<std::size_t>(h.actions[k - 1]);
    encode_step(prev, h.observations[k], std::span<double>(out).subspan(k * kInputDim, kInputDim));
  }
  return out;
}

data::SequenceSet histories_to_sequences(std::span<const std::shared_ptr<const History>> histories) {
  data::SequenceSet set(kInputDim);
  for (const auto& h : histories) {
    if (h->observations.empty()) continue;
    const auto v = encode_history(*h, h->observations.size() - 1);
    set.add(v, h->observations.size());
  }
  return set;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ContractViolation("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition tr) {
  if (!tr.episode || tr.t + 1 >= tr.episode->observations.size()) {
    throw ContractViolation("transition does not refer to its next observation");
  }
  if (items_.size() < capacity_) {
    items_.push_back(std::move(tr));
    return;
  }
  items_[head_] = std::move(tr);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw ContractViolation("replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw ContractViolation("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Transition*> out(count);
  for (auto& p : out) p = &items_[pick(rng)];
  return out;
}

std::vector<std::shared_ptr<const History>> ReplayBuffer::episodes() const {
  std::vector<std::shared_ptr<const History>> out;
  std::unordered_set<const History*> seen;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& e = at(i).episode;
    if (seen.insert(e.get()).second) out.push_back(e);
  }
  return out;
}

void check_network(const rnn::Network& net) {
  if (net.spec().input_dim != kInputDim) throw ContractViolation("Q-network input width must be 8");
  if (!net.head_index() || net.output_width() != tmaze::kActionCount) {
    throw ContractViolation("Q-network needs a linear head of width 4");
  }
}

Tensor q_forward(const rnn::Network& net, const ad::ParameterSet& params, const History& h) {
  if (h.observations.empty()) throw ContractViolation("empty history");
  QTracker tracker(net, params);
  Tensor q = tracker.observe(std::nullopt, h.observations[0]);
  for (std::size_t k = 1; k < h.observations.size(); ++k) q = tracker.observe(h.actions.at(k - 1), h.observations[k]);
  return q;
}

QTracker::QTracker(const rnn::Network& net, const ad::ParameterSet& params)
    : net_(&net), params_(params.constants()), state_(net.initial_state(1)) {
  check_network(net);
}

Tensor QTracker::observe(std::optional<std::size_t> previous_action, Observation obs) {
  Tensor x = Tensor::matrix(1, kInputDim);
  encode_step(previous_action, obs, x.data());
  Var top;
  state_ = net_->step(params_, state_, Var(std::move(x)), &top);
  return net_->head(params_, top).value();
}

std::size_t greedy_action(const Tensor& q) {
  if (q.size() != tmaze::kActionCount) throw ContractViolation("expected four Q-values");
  std::size_t best = 0;
  for (std::size_t a = 1; a < q.size(); ++a)
    if (q[a] > q[best]) best = a;
  return best;
}

std::size_t epsilon_greedy(const Tensor& q, double epsilon, Rng& rng) {
  std::bernoulli_distribution explore(epsilon);
  if (explore(rng)) return tmaze::exploration_action(rng);
  return greedy_action(q);
}

double td_target(double reward, bool terminal, double max_next_q, double discount) {
  return terminal ? reward : reward + discount * max_next_q;
}

namespace {

// Top-layer output after the last step of each row's prefix; row i covers
// steps 0 .. lengths[i] - 1 of its episode.
Var prefix_outputs(const rnn::Network& net, std::span<const Var> params, std::span<const Transition* const> batch,
                   std::span<const std::size_t> lengths) {
  const std::size_t n = batch.size();
  const std::size_t longest = *std::max_element(lengths.begin(), lengths.end());
  rnn::HiddenState state = net.initial_state(n);
  Var selected(Tensor::matrix(n, net.layer_output_width(net.layer_count() - 1)));
  std::vector<double> mask(n);
  for (std::size_t k = 0; k < longest; ++k) {
    Tensor x = Tensor::matrix(n, kInputDim);
    bool any_last = false;
    for (std::size_t i = 0; i < n; ++i) {
      mask[i] = k + 1 == lengths[i] ? 1.0 : 0.0;
      any_last = any_last || mask[i] == 1.0;
      if (k >= lengths[i]) continue;
      const History& h = *batch[i]->episode;
      const std::optional<std::size_t> prev = k == 0 ? std::nullopt : std::optional<std::size_t>(h.actions.at(k - 1));
      encode_step(prev, h.observations.at(k), x.data().subspan(i * kInputDim, kInputDim));
    }
    Var top;
    state = net.step(params, state, Var(std::move(x)), &top);
    if (any_last) selected = rnn::select_rows(mask, top, selected);
  }
  return selected;
}

}  // namespace

Learner::Learner(const rnn::Network& net, ad::ParameterSet online, train::AdamConfig adam, double discount)
    : net_(&net),
      online_(std::move(online)),
      target_(online_),
      adam_(adam),
      adam_state_(train::AdamState::zeros_like(online_)),
      discount_(discount) {
  check_network(net);
  adam_.validate();
}

std::vector<double> Learner::targets(std::span<const Transition* const> batch) const {
  if (batch.empty()) return {};
  std::vector<std::size_t> lengths;
  for (const Transition* tr : batch) lengths.push_back(tr->t + 2);
  const auto bound = target_.constants();
  const Tensor q = net_->head(bound, prefix_outputs(*net_, bound, batch, lengths)).value();
  std::vector<double> y;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double best = q.at(i, 0);
    for (std::size_t a = 1; a < tmaze::kActionCount; ++a) best = std::max(best, q.at(i, a));
    y.push_back(td_target(batch[i]->reward, batch[i]->terminal, best, discount_));
  }
  return y;
}

std::vector<double> Learner::predictions(std::span<const Transition* const> batch) const {
  if (batch.empty()) return {};
  std::vector<std::size_t> lengths;
  for (const Transition* tr : batch) lengths.push_back(tr->t + 1);
  const auto bound = online_.constants();
  const Tensor q = net_->head(bound, prefix_outputs(*net_, bound, batch, lengths)).value();
  std::vector<double> out;
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(q.at(i, batch[i]->action));
  return out;
}

double Learner::update(std::span<const Transition* const> batch) {
  if (batch.empty()) throw ContractViolation("empty update batch");
  const std::vector<double> y = targets(batch);
  const std::size_t n = batch.size();
  Tensor chosen = Tensor::matrix(n, tmaze::kActionCount);
  Tensor goal = Tensor::matrix(n, 1);
  std::vector<std::size_t> lengths;
  for (std::size_t i = 0; i < n; ++i) {
    chosen.at(i, batch[i]->action) = 1.0;
    goal.at(i, 0) = y[i];
    lengths.push_back(batch[i]->t + 1);
  }
  ad::Graph graph;
  const auto bound = online_.bind(graph);
  const Var q = net_->head(bound, prefix_outputs(*net_, bound, batch, lengths));
  const Var qa = ad::sum_last(ad::mul(q, Var(std::move(chosen))));
  const Var loss = ad::mean(ad::square(ad::sub(qa, Var(std::move(goal)))));
  const double value = loss.value().item();
  if (!std::isfinite(value)) throw DivergenceError("non-finite TD loss");
  graph.backward(loss);
  std::vector<Tensor> grads;
  for (const Var& p : bound) grads.push_back(graph.grad(p));
  train::adam_step(online_, grads, adam_state_, adam_);
  return value;
}

void DrqnConfig::validate() const {
  if (buffer_capacity == 0) throw ContractViolation("buffer capacity must be >= 1");
  if (target_period == 0) throw ContractViolation("target update period must be >= 1");
  if (updates_per_episode == 0) throw ContractViolation("updates per episode must be >= 1");
  if (batch_size == 0) throw ContractViolation("batch size must be >= 1");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractViolation("exploration rate must lie in [0, 1]");
  if (!(prefill_fraction > 0.0 && prefill_fraction <= 1.0)) throw ContractViolation("prefill fraction must lie in (0, 1]");
  if (smoothing_window == 0) throw ContractViolation("smoothing window must be >= 1");
  if (optimal_streak == 0) throw ContractViolation("optimal streak must be >= 1");
  adam.validate();
  if (warmup) warmup->validate();
  if (probe.period > 0) {
    probe.vaa.validate();
    if (probe.states == 0) throw ContractViolation("probe state count must be positive");
  }
}

double greedy_return(const rnn::Network& net, const ad::ParameterSet& params, const tmaze::Env& env,
                     std::size_t horizon) {
  double total = 0.0;
  for (tmaze::Layout layout : {tmaze::Layout::Up, tmaze::Layout::Down}) {
    tmaze::State s{layout, 0, 0};
    QTracker tracker(net, params);
    Tensor q = tracker.observe(std::nullopt, env.observe(s));
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t a = greedy_action(q);
      const tmaze::StepResult r = env.step(s, a);
      total += r.reward;
      s = r.next;
      if (r.terminal) break;
      q = tracker.observe(a, r.observation);
    }
  }
  return total / 2.0;
}

namespace {

struct Rollout {
  std::vector<Transition> transitions;
  double episode_return = 0.0;
};

template <class Choose>
Rollout rollout(const tmaze::Env& env, std::size_t horizon, Rng& env_rng, Choose&& choose) {
  auto history = std::make_shared<History>();
  Rollout out;
  const auto start = env.reset(env_rng);
  tmaze::State s = start.state;
  history->observations.push_back(start.observation);
  std::optional<std::size_t> prev;
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t a = choose(prev, history->observations.back());
    const tmaze::StepResult r = env.step(s, a);
    history->actions.push_back(a);
    history->observations.push_back(r.observation);
    out.episode_return += r.reward;
    out.transitions.push_back(Transition{nullptr, t, a, r.reward, r.terminal, !r.terminal && t + 1 == horizon});
    s = r.next;
    prev = a;
    if (r.terminal) break;
  }
  std::shared_ptr<const History> shared = history;
  for (auto& tr : out.transitions) tr.episode = shared;
  return out;
}

}  // namespace

DrqnResult train_drqn(const tmaze::Config& maze, const rnn::Network& net, ad::ParameterSet params,
                      const DrqnConfig& config, const EpisodeObserver& observer) {
  config.validate();
  check_network(net);
  const tmaze::Env env(maze);
  const std::size_t horizon = config.horizon > 0 ? config.horizon : tmaze::truncation_horizon(maze.length);
  Rng env_rng(mix_seed(config.seed, 1));
  Rng act_rng(mix_seed(config.seed, 2));
  Rng sample_rng(mix_seed(config.seed, 3));
  Rng warm_rng(mix_seed(config.seed, 4));
  Rng probe_rng(mix_seed(config.seed, 5));

  DrqnResult result;
  ReplayBuffer buffer(config.buffer_capacity);
  const auto prefill = std::max<std::size_t>(
      1, std::min(config.buffer_capacity,
                  static_cast<std::size_t>(std::ceil(config.prefill_fraction * static_cast<double>(config.buffer_capacity)))));
  while (buffer.size() < prefill) {
    Rollout r = rollout(env, horizon, env_rng, [&](auto, auto) { return tmaze::exploration_action(act_rng); });
    for (auto& tr : r.transitions) buffer.push(std::move(tr));
  }

  if (config.warmup) {
    const auto episodes = buffer.episodes();
    const data::SequenceSet seqs = histories_to_sequences(episodes);
    warmup::WarmupConfig wc = *config.warmup;
    wc.batch_size = std::min(wc.batch_size, seqs.size());
    try {
      result.warmup = warmup::run_warmup(net, params, seqs, wc, warm_rng);
    } catch (const DivergenceError& e) {
      result.diverged = true;
      result.divergence = std::string("warmup: ") + e.what();
      result.params = std::move(params);
      return result;
    }
  }

  Learner learner(net, std::move(params), config.adam, maze.discount);
  std::deque<double> recent;
  double recent_sum = 0.0;
  std::size_t streak = 0;
  std::size_t streak_start = 0;

  for (std::size_t e = 0; e < config.episodes; ++e) {
    if (e % config.target_period == 0) learner.sync_target();

    std::optional<QTracker> tracker;
    tracker.emplace(net, learner.online());
    Rollout r = rollout(env, horizon, env_rng, [&](std::optional<std::size_t> prev, Observation obs) {
      return epsilon_greedy(tracker->observe(prev, obs), config.epsilon, act_rng);
    });
    for (auto& tr : r.transitions) buffer.push(std::move(tr));

    try {
      for (std::size_t i = 0; i < config.updates_per_episode; ++i) {
        const auto batch = buffer.sample(config.batch_size, sample_rng);
        learner.update(batch);
      }
    } catch (const DivergenceError& err) {
      result.diverged = true;
      result.divergence = err.what();
    }

    EpisodeRow row;
    row.episode = e;
    row.episode_return = r.episode_return;
    recent.push_back(r.episode_return);
    recent_sum += r.episode_return;
    if (recent.size() > config.smoothing_window) {
      recent_sum -= recent.front();
      recent.pop_front();
    }
    row.smoothed_return = recent_sum / static_cast<double>(recent.size());
    row.epsilon = config.epsilon;
    row.buffer_size = buffer.size();

    if (!result.diverged && config.eval_period > 0 && (e + 1) % config.eval_period == 0) {
      row.eval_return = greedy_return(net, learner.online(), env, horizon);
      if (*row.eval_return == tmaze::kTreasureReward) {
        if (streak++ == 0) streak_start = e;
        if (streak >= config.optimal_streak && !result.optimal_episode) result.optimal_episode = streak_start;
      } else {
        streak = 0;
      }
    }
    if (!result.diverged && config.probe.period > 0 && (e + 1) % config.probe.period == 0) {
      const auto episodes = buffer.episodes();
      const data::SequenceSet seqs = histories_to_sequences(episodes);
      try {
        row.vaa = vaa::estimate_vaa_mean(net, learner.online(), seqs, config.probe.vaa,
                                         std::min(config.probe.states, seqs.size()), probe_rng)
                      .mean;
      } catch (const DivergenceError& err) {
        result.diverged = true;
        result.divergence = err.what();
      }
    }

    result.trace.push_back(row);
    result.episodes_completed = e + 1;
    if (observer) observer(row, learner);
    if (result.diverged) break;
    if (config.stop_when_optimal && result.optimal_episode) break;
  }
  result.params = learner.online();
  return result;
}

}  // namespace warmrnn::drqn
