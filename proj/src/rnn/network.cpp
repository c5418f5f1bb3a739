#include <cmath>
#include <random>

#include "warmrnn/errors.hpp"
#include "warmrnn/rnn.hpp"

namespace warmrnn::rnn {

using ad::Tensor;
using ad::Var;

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::GRU: return "gru";
    case CellKind::LSTM: return "lstm";
    case CellKind::MGU: return "mgu";
  }
  return "?";
}

CellKind parse_cell_kind(std::string_view name) {
  if (name == "gru" || name == "GRU") return CellKind::GRU;
  if (name == "lstm" || name == "LSTM") return CellKind::LSTM;
  if (name == "mgu" || name == "MGU") return CellKind::MGU;
  throw ContractViolation("unknown cell kind '" + std::string(name) + "'");
}

std::size_t gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::GRU: return 3;
    case CellKind::LSTM: return 4;
    case CellKind::MGU: return 2;
  }
  return 0;
}

void CellType::validate() const {
  if (chrono_tmax) {
    if (kind != CellKind::LSTM) throw ContractViolation("chrono initialisation is only defined for LSTM");
    if (*chrono_tmax < 2) throw ContractViolation("chrono T_max must be >= 2");
  }
}

std::size_t block_param_count(CellKind kind, std::size_t input_dim, std::size_t width) {
  return gate_count(kind) * (width * (width + input_dim) + width);
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_dim == 0) throw ContractViolation("network input_dim must be positive");
  if (spec_.layers.empty()) throw ContractViolation("network needs at least one layer");
  std::size_t in = spec_.input_dim;
  std::size_t index = 0;
  for (const LayerSpec& ls : spec_.layers) {
    ls.cell.validate();
    if (ls.width == 0) throw ContractViolation("layer width must be positive");
    std::vector<Block> blocks;
    if (!ls.warmed_fraction) {
      blocks.push_back(Block{ls.cell, in, ls.width, true, index});
      index += 3;
    } else {
      const double f = *ls.warmed_fraction;
      if (!(f >= 0.0 && f <= 1.0)) throw ContractViolation("warmed fraction must lie in [0, 1]");
      const auto warm = static_cast<std::size_t>(std::lround(f * static_cast<double>(ls.width)));
      const std::size_t cold = ls.width - warm;
      if (cold > 0) {
        blocks.push_back(Block{ls.cell, in, cold, false, index});
        index += 3;
      }
      if (warm > 0) {
        blocks.push_back(Block{ls.cell, in, warm, true, index});
        index += 3;
      }
    }
    layers_.push_back(std::move(blocks));
    in = ls.width;
  }
  if (spec_.output_dim > 0) {
    head_index_ = index;
    index += 2;
  }
  param_tensor_count_ = index;
}

std::size_t Network::layer_input_width(std::size_t layer) const {
  return layer == 0 ? spec_.input_dim : spec_.layers.at(layer - 1).width;
}

std::size_t Network::layer_output_width(std::size_t layer) const { return spec_.layers.at(layer).width; }

std::size_t Network::output_width() const {
  return spec_.output_dim > 0 ? spec_.output_dim : spec_.layers.back().width;
}

std::size_t Network::state_width() const {
  std::size_t w = 0;
  for (const auto& layer : layers_)
    for (const Block& b : layer) w += b.state_width();
  return w;
}

bool Network::partitioned() const noexcept {
  for (const LayerSpec& ls : spec_.layers)
    if (!ls.warmed_fraction) return false;
  return true;
}

ad::ParameterSet Network::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  ad::ParameterSet params;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    for (std::size_t bi = 0; bi < layers_[l].size(); ++bi) {
      const Block& b = layers_[l][bi];
      const std::size_t g = gate_count(b.cell.kind);
      const double k = 1.0 / std::sqrt(static_cast<double>(b.input_dim + b.width));
      std::uniform_real_distribution<double> weight(-k, k);
      Tensor w(ad::Shape{b.input_dim, g * b.width});
      for (double& v : w.storage()) v = weight(rng);
      Tensor u(ad::Shape{b.width, g * b.width});
      for (double& v : u.storage()) v = weight(rng);
      Tensor bias(ad::Shape{g * b.width}, 0.0);
      if (b.cell.chrono_tmax) {
        std::uniform_real_distribution<double> horizon(1.0, static_cast<double>(*b.cell.chrono_tmax - 1));
        for (std::size_t j = 0; j < b.width; ++j) {
          const double forget = std::log(horizon(rng));
          bias[b.width + j] = forget;   // f group
          bias[j] = -forget;            // i group
        }
      }
      const std::string prefix = "l" + std::to_string(l) + ".b" + std::to_string(bi) + ".";
      params.add(prefix + "W", std::move(w));
      params.add(prefix + "U", std::move(u));
      params.add(prefix + "b", std::move(bias));
    }
  }
  if (head_index_) {
    const std::size_t in = spec_.layers.back().width;
    const double k = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> weight(-k, k);
    Tensor w(ad::Shape{in, spec_.output_dim});
    for (double& v : w.storage()) v = weight(rng);
    params.add("head.W", std::move(w));
    params.add("head.b", Tensor(ad::Shape{spec_.output_dim}, 0.0));
  }
  return params;
}

HiddenState Network::initial_state(std::size_t batch) const {
  HiddenState state;
  for (const auto& layer : layers_) {
    LayerState ls;
    for (const Block& b : layer) ls.emplace_back(Tensor::matrix(batch, b.state_width()));
    state.push_back(std::move(ls));
  }
  return state;
}

Var Network::block_step(std::span<const Var> params, const Block& block, const Var& state,
                        const Var& input) const {
  if (input.cols() != block.input_dim) {
    throw ContractViolation("block input width " + std::to_string(input.cols()) + " does not match " +
                            std::to_string(block.input_dim));
  }
  if (state.cols() != block.state_width()) {
    throw ContractViolation("block state width " + std::to_string(state.cols()) + " does not match " +
                            std::to_string(block.state_width()));
  }
  const Var& W = params[block.param_index];
  const Var& U = params[block.param_index + 1];
  const Var& b = params[block.param_index + 2];
  const std::size_t h = block.width;
  const Var gx = add(matmul(input, W), b);

  switch (block.cell.kind) {
    case CellKind::GRU: {
      const Var gh = matmul(state, slice(U, 0, 2 * h));
      const Var z = sigmoid(add(slice(gx, 0, h), slice(gh, 0, h)));
      const Var r = sigmoid(add(slice(gx, h, 2 * h), slice(gh, h, 2 * h)));
      const Var c = tanh(add(slice(gx, 2 * h, 3 * h), matmul(mul(r, state), slice(U, 2 * h, 3 * h))));
      return add(state, mul(z, sub(c, state)));
    }
    case CellKind::MGU: {
      const Var f = sigmoid(add(slice(gx, 0, h), matmul(state, slice(U, 0, h))));
      const Var c = tanh(add(slice(gx, h, 2 * h), matmul(mul(f, state), slice(U, h, 2 * h))));
      return add(state, mul(f, sub(c, state)));
    }
    case CellKind::LSTM: {
      const Var hid = slice(state, 0, h);
      const Var cell = slice(state, h, 2 * h);
      const Var g = add(gx, matmul(hid, U));
      const Var i = sigmoid(slice(g, 0, h));
      const Var f = sigmoid(slice(g, h, 2 * h));
      const Var cand = tanh(slice(g, 2 * h, 3 * h));
      const Var o = sigmoid(slice(g, 3 * h, 4 * h));
      const Var next_cell = add(mul(f, cell), mul(i, cand));
      const Var next_hid = mul(o, tanh(next_cell));
      return concat(next_hid, next_cell);
    }
  }
  throw ContractViolation("unknown cell kind");
}

Var Network::block_output(const Block& block, const Var& state) {
  if (block.cell.kind == CellKind::LSTM) return slice(state, 0, block.width);
  return state;
}

Var Network::layer_output(const HiddenState& state, std::size_t layer) const {
  const auto& blocks = layers_.at(layer);
  if (blocks.size() == 1) return block_output(blocks[0], state[layer][0]);
  std::vector<Var> outs;
  for (std::size_t b = 0; b < blocks.size(); ++b) outs.push_back(block_output(blocks[b], state[layer][b]));
  return ad::concat(outs);
}

HiddenState Network::step(std::span<const Var> params, const HiddenState& state, const Var& input,
                          Var* top_output) const {
  if (params.size() != param_tensor_count_) {
    throw ContractViolation("expected " + std::to_string(param_tensor_count_) + " parameter tensors, got " +
                            std::to_string(params.size()));
  }
  if (state.size() != layers_.size()) throw ContractViolation("hidden state has wrong layer count");
  HiddenState next;
  next.reserve(layers_.size());
  Var layer_input = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    LayerState ls;
    for (std::size_t b = 0; b < layers_[l].size(); ++b)
      ls.push_back(block_step(params, layers_[l][b], state[l][b], layer_input));
    next.push_back(std::move(ls));
    layer_input = layer_output(next, l);
  }
  if (top_output) *top_output = layer_input;
  return next;
}

Var Network::head(std::span<const Var> params, const Var& top_output) const {
  if (!head_index_) return top_output;
  return add(matmul(top_output, params[*head_index_]), params[*head_index_ + 1]);
}

Var Network::flatten(const HiddenState& state) const {
  std::vector<Var> parts;
  for (const auto& layer : state)
    for (const Var& v : layer) parts.push_back(v);
  if (parts.size() == 1) return parts[0];
  return ad::concat(parts);
}

HiddenState Network::unflatten(const Var& flat) const {
  if (flat.cols() != state_width()) throw ContractViolation("flattened state has wrong width");
  HiddenState state;
  std::size_t offset = 0;
  for (const auto& layer : layers_) {
    LayerState ls;
    for (const Block& b : layer) {
      if (layers_.size() == 1 && layer.size() == 1) {
        ls.push_back(flat);
      } else {
        ls.push_back(slice(flat, offset, offset + b.state_width()));
      }
      offset += b.state_width();
    }
    state.push_back(std::move(ls));
  }
  return state;
}

Unrolled unroll(const Network& net, std::span<const Var> params, std::span<const Var> inputs,
                HiddenState initial) {
  if (inputs.empty()) throw ContractViolation("unroll needs at least one input step");
  Unrolled out;
  out.states.reserve(inputs.size());
  out.outputs.reserve(inputs.size());
  HiddenState state = std::move(initial);
  for (const Var& u : inputs) {
    Var top;
    state = net.step(params, state, u, &top);
    out.states.push_back(state);
    out.outputs.push_back(top);
  }
  return out;
}

Var select_rows(const std::vector<double>& mask, const Var& a, const Var& b) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  if (mask.size() != rows || b.rows() != rows || b.cols() != cols) {
    throw ContractViolation("select_rows: mask/operand shapes disagree");
  }
  bool all_a = true;
  bool all_b = true;
  for (double m : mask) {
    all_a = all_a && m == 1.0;
    all_b = all_b && m == 0.0;
  }
  if (all_a) return a;
  if (all_b) return b;
  Tensor keep_a(ad::Shape{rows, cols});
  Tensor keep_b(ad::Shape{rows, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      keep_a.at(r, c) = mask[r];
      keep_b.at(r, c) = 1.0 - mask[r];
    }
  return add(mul(Var(std::move(keep_a)), a), mul(Var(std::move(keep_b)), b));
}

HiddenState select_rows(const std::vector<double>& mask, const HiddenState& a, const HiddenState& b) {
  HiddenState out;
  for (std::size_t l = 0; l < a.size(); ++l) {
    LayerState ls;
    for (std::size_t k = 0; k < a[l].size(); ++k) ls.push_back(select_rows(mask, a[l][k], b[l][k]));
    out.push_back(std::move(ls));
  }
  return out;
}

Partition warmed_parameter_partition(const Network& net) {
  if (!net.partitioned()) {
    throw ContractViolation("warmed_parameter_partition requires a double-layer (partitioned) network");
  }
  Partition p;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (const Block& b : net.blocks(l)) {
      auto& dst = b.warmed ? p.warmed : p.frozen;
      for (std::size_t k = 0; k < 3; ++k) dst.push_back(b.param_index + k);
    }
  }
  if (net.head_index()) {
    p.frozen.push_back(*net.head_index());
    p.frozen.push_back(*net.head_index() + 1);
  }
  return p;
}

}  // namespace warmrnn::rnn
