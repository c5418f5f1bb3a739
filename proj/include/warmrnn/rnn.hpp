#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "warmrnn/graph.hpp"
#include "warmrnn/parameters.hpp"

// Recurrent cells, stacked and double-layer networks.
//
// Batched row-vector convention: states are (batch x width), inputs are
// (batch x input_dim), and each block owns parameters
//   W : input_dim x (G * width)    input weights
//   U : width x (G * width)        recurrent weights
//   b : G * width                  biases
// with G gate groups laid out contiguously in the order listed below.
//
// GRU   (groups z | r | c)
//   z  = sigmoid(u W_z + x U_z + b_z)
//   r  = sigmoid(u W_r + x U_r + b_r)
//   c  = tanh(u W_c + (r * x) U_c + b_c)
//   x' = (1 - z) * x + z * c
//
// LSTM  (groups i | f | g | o), state x = [h | c]
//   i = sigmoid(.), f = sigmoid(.), g = tanh(.), o = sigmoid(.)   each of u W + h U + b
//   c' = f * c + i * g
//   h' = o * tanh(c')
//
// MGU   (groups f | c)
//   f  = sigmoid(u W_f + x U_f + b_f)
//   c  = tanh(u W_c + (f * x) U_c + b_c)
//   x' = (1 - f) * x + f * c
//
// The output of a block is its state (LSTM: the h half).
namespace warmrnn::rnn {

enum class CellKind { GRU, LSTM, MGU };

std::string_view to_string(CellKind kind);
CellKind parse_cell_kind(std::string_view name);
std::size_t gate_count(CellKind kind);

struct CellType {
  CellKind kind = CellKind::GRU;
  // Chrono initialisation horizon T_max (LSTM only, >= 2).
  std::optional<unsigned> chrono_tmax;

  void validate() const;
};

struct LayerSpec {
  CellType cell;
  std::size_t width = 0;
  // Present for double-layer (partitioned) layers: the fraction of the
  // layer's units that form the warmed block. Absent for ordinary layers.
  std::optional<double> warmed_fraction;
};

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<LayerSpec> layers;
  // Width of the linear output head over the top layer's output; 0 means the
  // network output is the top layer's output itself.
  std::size_t output_dim = 0;
};

// A single recurrent cell inside a layer. Ordinary layers hold one block;
// double layers hold a frozen block and a warmed block fed the same input.
struct Block {
  CellType cell;
  std::size_t input_dim = 0;
  std::size_t width = 0;
  bool warmed = true;
  std::size_t param_index = 0;  // W, U, b live at param_index, +1, +2

  std::size_t state_width() const noexcept { return cell.kind == CellKind::LSTM ? 2 * width : width; }
};

using LayerState = std::vector<ad::Var>;   // one entry per block
using HiddenState = std::vector<LayerState>;

class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::span<const Block> blocks(std::size_t layer) const { return layers_.at(layer); }
  std::size_t layer_input_width(std::size_t layer) const;
  std::size_t layer_output_width(std::size_t layer) const;
  std::size_t output_width() const;
  // Width of the flattened network state (all layers, all blocks).
  std::size_t state_width() const;
  bool partitioned() const noexcept;
  std::optional<std::size_t> head_index() const noexcept { return head_index_; }
  std::size_t param_tensor_count() const noexcept { return param_tensor_count_; }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights with fan_in = input_dim +
  // width for recurrent blocks and the top width for the head; zero biases;
  // chrono LSTM forget biases log(U[1, T_max - 1]) with input biases negated.
  ad::ParameterSet init_params(std::uint64_t seed) const;

  // h(theta): zero state for every block.
  HiddenState initial_state(std::size_t batch) const;

  ad::Var block_step(std::span<const ad::Var> params, const Block& block, const ad::Var& state,
                     const ad::Var& input) const;
  static ad::Var block_output(const Block& block, const ad::Var& state);

  // Advances every layer by one step. Layer l receives the concatenated block
  // outputs of layer l-1. When `top_output` is non-null it receives the top
  // layer's output.
  HiddenState step(std::span<const ad::Var> params, const HiddenState& state, const ad::Var& input,
                   ad::Var* top_output = nullptr) const;
  ad::Var layer_output(const HiddenState& state, std::size_t layer) const;

  // Output function g: linear head, or identity when output_dim == 0.
  ad::Var head(std::span<const ad::Var> params, const ad::Var& top_output) const;

  // Concatenation of every block state, layer by layer.
  ad::Var flatten(const HiddenState& state) const;
  HiddenState unflatten(const ad::Var& flat) const;

 private:
  NetworkSpec spec_;
  std::vector<std::vector<Block>> layers_;
  std::optional<std::size_t> head_index_;
  std::size_t param_tensor_count_ = 0;
};

struct Unrolled {
  std::vector<HiddenState> states;   // states[t] after input t (0-based)
  std::vector<ad::Var> outputs;      // top-layer outputs, before the head
};

Unrolled unroll(const Network& net, std::span<const ad::Var> params, std::span<const ad::Var> inputs,
                HiddenState initial);

// Row-wise selection: rows where mask == 1 come from `a`, others from `b`.
// `mask` is a (rows x 1) 0/1 column broadcast over the features.
ad::Var select_rows(const std::vector<double>& mask, const ad::Var& a, const ad::Var& b);
HiddenState select_rows(const std::vector<double>& mask, const HiddenState& a, const HiddenState& b);

// Parameter tensor indices of the warmed blocks and of everything else.
struct Partition {
  std::vector<std::size_t> warmed;
  std::vector<std::size_t> frozen;
};
// Requires a partitioned network (every layer has a warmed fraction).
Partition warmed_parameter_partition(const Network& net);

std::size_t block_param_count(CellKind kind, std::size_t input_dim, std::size_t width);

}  // namespace warmrnn::rnn
