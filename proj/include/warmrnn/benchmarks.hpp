#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "warmrnn/graph.hpp"
#include "warmrnn/sequences.hpp"

namespace warmrnn::data {

enum class LossKind {
  FinalSquaredError,     // (o_T - y)^2
  LastFiveSquaredError,  // sum_{k<5} (o_{T-4+k} - y_k)^2
  FinalNll,              // -log softmax(o_T)[class]
};

std::string_view to_string(LossKind kind);
// Number of trailing outputs the loss looks at.
std::size_t scored_steps(LossKind kind);
// Width of the network output the loss expects.
std::size_t output_dim(LossKind kind);

// Supervised dataset: input sequences plus one target row per sample.
// Regression targets hold the values to emit; classification targets are
// one-hot rows of width 10.
struct Dataset {
  LossKind loss = LossKind::FinalSquaredError;
  SequenceSet inputs;
  std::size_t target_cols = 0;
  std::vector<double> targets;  // size() * target_cols, row-major

  std::size_t size() const noexcept { return inputs.size(); }
  std::span<const double> target(std::size_t i) const;
  bool classification() const noexcept { return loss == LossKind::FinalNll; }
  std::size_t label(std::size_t i) const;  // argmax of the one-hot row

  // Batch x target_cols matrix for the given samples.
  ad::Tensor batch_targets(std::span<const std::size_t> indices) const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

struct CopyFirstInputSpec {
  std::size_t length = 50;  // T
  std::size_t samples = 40000;
  std::uint64_t seed = 0;
};

struct DenoisingSpec {
  std::size_t length = 200;  // T
  std::size_t forgetting = 5;  // N
  std::size_t samples = 40000;
  std::uint64_t seed = 0;
};

// u_t ~ N(0, 1), one channel; target u_1.
Dataset gen_copy_first_input(const CopyFirstInputSpec& spec);

// Channel 0: N(0, 1) stream. Channel 1: 1 at five timesteps drawn without
// replacement from {1..T-N}. Targets: the marked channel-0 values in time
// order, to be emitted at steps T-4..T.
Dataset gen_denoising(const DenoisingSpec& spec);
// Marked timesteps (1-based, sorted) of a denoising sample.
std::vector<std::size_t> marked_steps(const Dataset& data, std::size_t i);

struct MnistData {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> pixels;         // count * rows * cols, scaled to [0, 1]
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> image(std::size_t i) const;
};

// Big-endian IDX: images magic 0x00000803 (count x rows x cols bytes),
// labels magic 0x00000801 (count bytes).
MnistData load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
void write_mnist_idx(const MnistData& data, const std::filesystem::path& images,
                     const std::filesystem::path& labels);

enum class MnistMode { Pixel, Line };

struct PermutedMnistSpec {
  MnistMode mode = MnistMode::Pixel;
  std::uint64_t permutation_seed = 0;
  std::size_t black_lines = 0;  // N, line mode only
};

// Uniform random permutation of {0..size-1}.
std::vector<std::size_t> pixel_permutation(std::size_t size, std::uint64_t seed);

// Pixel mode: 1-dim sequences of rows*cols permuted pixels. Line mode: the
// permuted image fed `cols` pixels per step, followed by N zero rows.
Dataset make_permuted_sequences(const MnistData& images, const PermutedMnistSpec& spec);
Dataset make_permuted_sequences(const MnistData& images, std::span<const std::size_t> permutation,
                                MnistMode mode, std::size_t black_lines);

// Batch-mean loss. `outputs` are the last scored_steps(kind) network
// outputs (batch x output_dim each), oldest first; `targets` is
// batch x target_cols.
ad::Var task_loss(LossKind kind, std::span<const ad::Var> outputs, const ad::Tensor& targets);

// Per-sample losses (no graph) and, for classification, hits.
struct SampleScores {
  std::vector<double> losses;
  std::vector<bool> correct;
};
SampleScores score_batch(LossKind kind, std::span<const ad::Tensor> outputs, const ad::Tensor& targets);

// Length-prefixed binary cache:
//   "WRNNDSET" | u32 version (=1) | u32 loss kind | u64 input_dim |
//   u64 target_cols | u64 count |
//   count x { u64 length | f64 inputs[length * input_dim] | f64 target[target_cols] }
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace warmrnn::data
