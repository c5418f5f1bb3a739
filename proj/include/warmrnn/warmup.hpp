#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "warmrnn/parameters.hpp"
#include "warmrnn/rnn.hpp"
#include "warmrnn/trainer.hpp"
#include "warmrnn/sequences.hpp"
#include "warmrnn/vaa.hpp"

namespace warmrnn::warmup {

enum class WarmupOptimizer { Sgd, Adam };

const char* to_string(WarmupOptimizer o) noexcept;

struct WarmupConfig {
  std::size_t steps = 100;              // S
  std::size_t batch_size = 200;         // n
  double learning_rate = 1e-2;          // alpha
  double target = 0.95;                 // k
  std::size_t max_stabilization = 200;  // M*
  std::size_t increment = 10;           // c
  double epsilon = 1e-4;
  // Grow M* by c after every step instead of holding it fixed.
  bool grow_max_stabilization = false;
  // Truncate BPTT through the state-sampling unroll; 0 keeps the full unroll.
  std::size_t bptt_window = 0;
  // Adam uses learning_rate with the default betas; moments start at zero.
  WarmupOptimizer optimizer = WarmupOptimizer::Sgd;

  void validate() const;
};

// M_max(s) = min(M*, 1 + c * s) for step s >= 1.
std::size_t max_stabilization_period(std::size_t step, std::size_t max_stabilization, std::size_t increment);

// (1/L) sum_l (v_l - k)^2
ad::Var warmup_loss(std::span<const ad::Var> per_layer, double target);
double warmup_loss(std::span<const double> per_layer, double target);

struct TraceRow {
  std::size_t step = 0;
  std::size_t sampled_stabilization = 0;
  std::vector<double> vaa_star;  // per warmed layer
  double loss = 0.0;
};

struct WarmupResult {
  std::vector<TraceRow> trace;
  std::vector<std::size_t> warmed_layers;  // layers that own a warmed block
};

// Parameter tensors that warmup may change: the warmed blocks of a
// partitioned network, or every recurrent tensor otherwise.
std::vector<std::size_t> warmable_parameters(const rnn::Network& net);

// Gradient descent (SGD or Adam) on the warmup loss for `config.steps` steps, updating `params` in
// place. Only tensors from warmable_parameters() are modified.
WarmupResult run_warmup(const rnn::Network& net, ad::ParameterSet& params, const data::SequenceSet& sequences,
                        const WarmupConfig& config, vaa::Rng& rng);

}  // namespace warmrnn::warmup
