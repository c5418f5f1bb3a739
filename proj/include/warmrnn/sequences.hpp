#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "warmrnn/tensor.hpp"

namespace warmrnn::data {

// Ragged collection of input sequences u_{1:T_i}, each step a vector of
// `input_dim` values. Storage is one contiguous buffer.
class SequenceSet {
 public:
  SequenceSet() = default;
  explicit SequenceSet(std::size_t input_dim) : input_dim_(input_dim) {}

  // `values` holds length * input_dim numbers, step-major.
  void add(std::span<const double> values, std::size_t length);
  void reserve(std::size_t sequences, std::size_t total_steps);

  std::size_t size() const noexcept { return lengths_.size(); }
  bool empty() const noexcept { return lengths_.empty(); }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t length(std::size_t i) const { return lengths_.at(i); }
  std::size_t max_length() const noexcept;

  // Step t (0-based) of sequence i.
  std::span<const double> step(std::size_t i, std::size_t t) const;
  std::span<const double> sequence(std::size_t i) const;

  // Batch x input_dim matrix of step t for the given sequences; rows of
  // sequences shorter than t + 1 are zero.
  ad::Tensor batch_step(std::span<const std::size_t> indices, std::size_t t) const;

 private:
  std::size_t input_dim_ = 0;
  std::vector<double> values_;
  std::vector<std::size_t> offsets_;  // in values
  std::vector<std::size_t> lengths_;
};

}  // namespace warmrnn::data
