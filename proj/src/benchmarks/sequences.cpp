#include "warmrnn/sequences.hpp"

#include <algorithm>

#include "warmrnn/errors.hpp"

namespace warmrnn::data {

void SequenceSet::add(std::span<const double> values, std::size_t length) {
  if (length == 0) throw ContractViolation("sequence length must be >= 1");
  if (values.size() != length * input_dim_) {
    throw ContractViolation("sequence has " + std::to_string(values.size()) + " values, expected " +
                            std::to_string(length * input_dim_));
  }
  offsets_.push_back(values_.size());
  lengths_.push_back(length);
  values_.insert(values_.end(), values.begin(), values.end());
}

void SequenceSet::reserve(std::size_t sequences, std::size_t total_steps) {
  offsets_.reserve(sequences);
  lengths_.reserve(sequences);
  values_.reserve(total_steps * input_dim_);
}

std::size_t SequenceSet::max_length() const noexcept {
  return lengths_.empty() ? 0 : *std::max_element(lengths_.begin(), lengths_.end());
}

std::span<const double> SequenceSet::step(std::size_t i, std::size_t t) const {
  if (t >= lengths_.at(i)) throw ContractViolation("step index past sequence end");
  return std::span<const double>(values_).subspan(offsets_[i] + t * input_dim_, input_dim_);
}

std::span<const double> SequenceSet::sequence(std::size_t i) const {
  return std::span<const double>(values_).subspan(offsets_.at(i), lengths_[i] * input_dim_);
}

ad::Tensor SequenceSet::batch_step(std::span<const std::size_t> indices, std::size_t t) const {
  ad::Tensor out = ad::Tensor::matrix(indices.size(), input_dim_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (t < lengths_.at(i)) {
      std::copy_n(values_.data() + offsets_[i] + t * input_dim_, input_dim_, out.data().data() + r * input_dim_);
    }
  }
  return out;
}

}  // namespace warmrnn::data
