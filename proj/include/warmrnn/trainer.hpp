#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warmrnn/benchmarks.hpp"
#include "warmrnn/parameters.hpp"
#include "warmrnn/random.hpp"
#include "warmrnn/rnn.hpp"
#include "warmrnn/vaa.hpp"

namespace warmrnn::train {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

// First and second moments, one pair per parameter tensor.
struct AdamState {
  std::vector<ad::Tensor> m;
  std::vector<ad::Tensor> v;
  std::size_t step = 0;

  static AdamState zeros_like(const ad::ParameterSet& params);
};

// One bias-corrected Adam update at step t >= 1:
//   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
//   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
void adam_update(ad::Tensor& param, const ad::Tensor& grad, ad::Tensor& m, ad::Tensor& v, std::size_t t,
                 const AdamConfig& config);

// Advances state.step and updates every tensor listed in `which` (all when
// empty). Throws DivergenceError naming the tensor on non-finite gradients.
void adam_step(ad::ParameterSet& params, std::span<const ad::Tensor> grads, AdamState& state,
               const AdamConfig& config, std::span<const std::size_t> which = {});

struct ProbeConfig {
  std::size_t period = 1;      // epochs between probes; 0 disables
  std::size_t states = 100;    // |X|
  vaa::VaaConfig vaa{2000, 1e-4, 1};
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 100;
  AdamConfig adam;
  double validation_fraction = 0.1;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
  ProbeConfig probe;
  std::uint64_t seed = 0;
  bool record_wall_time = true;

  void validate() const;
};

struct TraceRow {
  std::size_t epoch = 0;
  std::string split;                  // train | validation | test
  double loss = 0.0;
  std::optional<double> accuracy;     // classification only
  std::optional<double> vaa;          // probed epochs, train rows
  double wall_time_s = 0.0;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  bool diverged = false;
  std::string divergence;
  std::size_t epochs_completed = 0;
  std::optional<double> final_validation_loss;
  std::optional<double> final_test_loss;
  std::optional<double> final_test_accuracy;
  std::optional<double> final_vaa;
};

struct EvalResult {
  double loss = 0.0;
  std::optional<double> accuracy;
};

// Mean per-sample loss over the dataset; no parameter mutation.
EvalResult evaluate(const rnn::Network& net, const ad::ParameterSet& params, const data::Dataset& dataset,
                    std::size_t batch_size = 500);

// Forward pass over a batch of equal-length sequences; returns the head
// outputs for the last `scored` steps.
std::vector<ad::Var> forward_scored(const rnn::Network& net, std::span<const ad::Var> params,
                                    const data::Dataset& dataset, std::span<const std::size_t> batch,
                                    std::size_t scored);

// Splits off `fraction` of the samples as a validation set (seeded shuffle).
std::pair<data::Dataset, data::Dataset> split_validation(const data::Dataset& dataset, double fraction,
                                                         std::uint64_t seed);

// Epoch loop over shuffled minibatches with Adam. Rows for epoch 0 describe
// the untrained network. A non-finite loss stops training and is reported
// in the result rather than thrown.
TrainResult train_supervised(const rnn::Network& net, ad::ParameterSet& params, const data::Dataset& train,
                             const TrainConfig& config, const data::Dataset* test = nullptr,
                             const std::function<void(const TraceRow&)>& on_row = {});

}  // namespace warmrnn::train
