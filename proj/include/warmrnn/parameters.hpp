#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warmrnn/graph.hpp"
#include "warmrnn/tensor.hpp"

namespace warmrnn::ad {

// Ordered collection of named trainable tensors (the flat vector theta).
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const noexcept { return values_.size(); }
  Tensor& operator[](std::size_t i) { return values_[i]; }
  const Tensor& operator[](std::size_t i) const { return values_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  std::optional<std::size_t> find(const std::string& name) const;

  // Total number of scalars.
  std::size_t scalar_count() const noexcept;

  // Leaves on `graph`, one per tensor, in order.
  std::vector<Var> bind(Graph& graph) const;
  // Unrecorded handles for gradient-free evaluation.
  std::vector<Var> constants() const;

  // FNV-1a over names, shapes and the exact bit patterns of the values.
  std::uint64_t hash() const noexcept;

  bool operator==(const ParameterSet& other) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

// Binary checkpoint, little-endian:
//   "WRNNCKPT" | u32 version (=1) | u64 count |
//   count x { u32 name_len | name bytes | u32 rank | u64 dims[rank] | f64 values[] }
// Values are stored as raw IEEE-754 doubles, so a round trip is bit-exact.
void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
ParameterSet load_checkpoint(const std::filesystem::path& path);

// --- gradient checking -----------------------------------------------------

// Builds a scalar from parameter handles (recorded leaves or constants).
using ScalarFn = std::function<Var(std::span<const Var> params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  double max_abs_gradient = 0.0;  // largest |analytic| component
  bool passed = true;  // max_relative_error <= tolerance
};

// Compares reverse-mode gradients against central differences
// (f(p+h) - f(p-h)) / 2h for every scalar of every tensor. The relative error
// of a component is |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
// Throws DivergenceError naming the parameter when f is not finite.
GradCheckResult gradient_check(const ScalarFn& f, std::span<const Tensor> params, double step,
                               double tolerance);

}  // namespace warmrnn::ad
