#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "warmrnn/graph.hpp"
#include "warmrnn/random.hpp"
#include "warmrnn/rnn.hpp"
#include "warmrnn/sequences.hpp"

// Variability Amongst Attractors.
//
// For a batch of initial states X = {x_1..x_n}, a constant input u and a
// stabilization period M, every state is iterated M times under f(., u).
// With finals y_i = f^M(x_i, u):
//
//   VAA_{M,eps}  = (1/n) sum_i 1 / sum_j [ ||y_i - y_j|| <= eps ]
//   VAA*_{M,eps} = (1/n) sum_i 1 / sum_j C*_ij
//   C*_ij        = 1 - max(0, d_ij - eps) / d_ij,   d_ij = ||tanh y_i - tanh y_j||
//
// n * VAA counts the distinct attractors reached; it lies in [1/n, 1].
// C*_ij is defined as 1 when d_ij == 0.
namespace warmrnn::vaa {

using warmrnn::Rng;

struct VaaConfig {
  std::size_t stabilization = 1;   // M
  double epsilon = 1e-4;
  std::size_t iterations = 1;      // I

  void validate() const;
};

// Initial states sampled along input sequences.
struct StateSet {
  rnn::HiddenState states;  // one row per sampled sequence
  // (sequence index, timestep t in 1..T_i) of each row.
  std::vector<std::pair<std::size_t, std::size_t>> provenance;

  std::size_t size() const noexcept { return provenance.size(); }
};

// Batched update x' = f(x, u); u is a single row broadcast over the batch.
using Dynamics = std::function<ad::Var(const ad::Var& state, const ad::Var& input)>;

// Joint update of every layer, on the flattened network state, driven by the
// network input.
Dynamics network_dynamics(const rnn::Network& net, std::span<const ad::Var> params);
// Update of one block with its input held constant.
Dynamics block_dynamics(const rnn::Network& net, std::span<const ad::Var> params, std::size_t layer,
                        std::size_t block);

// For each listed sequence, draws t uniformly in {1..T_i} and runs the network
// from h(theta) over the first t inputs. Gradients flow through the unroll
// when `params` are recorded; a non-zero `bptt_window` detaches the state
// that many steps before the longest draw.
StateSet random_hidden_states(const rnn::Network& net, std::span<const ad::Var> params,
                              const data::SequenceSet& sequences, std::span<const std::size_t> batch,
                              Rng& rng, std::size_t bptt_window = 0);

// u ~ N(0, 1) as a 1 x dim row.
ad::Tensor sample_perturbation(std::size_t dim, Rng& rng);

// `stabilization` applications of f; throws DivergenceError on non-finite
// states.
ad::Var stabilize(const Dynamics& f, ad::Var states, const ad::Var& input, std::size_t stabilization);

// Pairwise truncated VAA of already stabilized states (rows).
double vaa_of_finals(const ad::Tensor& finals, double epsilon);
double truncated_vaa(const Dynamics& f, const ad::Tensor& states, const ad::Tensor& input,
                     std::size_t stabilization, double epsilon);

// Differentiable proxy of already stabilized states.
ad::Var vaa_star_of_finals(const ad::Var& finals, double epsilon);
ad::Var vaa_star(const Dynamics& f, const ad::Var& states, const ad::Var& input, std::size_t stabilization,
                 double epsilon);

struct Estimate {
  double mean = 0.0;
  std::vector<double> values;   // one per iteration
  std::size_t states = 0;       // |X| of the last iteration
};

// Mean truncated VAA of the whole network over `config.iterations` draws of
// (batch, initial states, perturbation on the network input).
Estimate estimate_vaa_mean(const rnn::Network& net, const ad::ParameterSet& params,
                           const data::SequenceSet& sequences, const VaaConfig& config, std::size_t batch_size,
                           Rng& rng);

struct ProbeRow {
  std::size_t iteration = 0;
  std::string layer;  // "network", or the layer index ("l.b" for split layers)
  double vaa = 0.0;
  double vaa_star = 0.0;
  std::size_t states = 0;
  std::size_t stabilization = 0;
  double epsilon = 0.0;
};

// Per iteration: one network-level row (perturbation on the network input),
// then one row per block under its own dynamics and perturbation.
std::vector<ProbeRow> probe_layers(const rnn::Network& net, const ad::ParameterSet& params,
                                   const data::SequenceSet& sequences, const VaaConfig& config,
                                   std::size_t batch_size, Rng& rng);

// `count` distinct indices drawn uniformly from {0..population-1}.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count, Rng& rng);

}  // namespace warmrnn::vaa
