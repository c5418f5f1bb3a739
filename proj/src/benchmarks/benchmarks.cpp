#include "warmrnn/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "warmrnn/errors.hpp"
#include "warmrnn/random.hpp"

namespace warmrnn::data {

using ad::Tensor;
using ad::Var;

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::FinalSquaredError: return "final_squared_error";
    case LossKind::LastFiveSquaredError: return "last_five_squared_error";
    case LossKind::FinalNll: return "final_nll";
  }
  return "?";
}

std::size_t scored_steps(LossKind kind) { return kind == LossKind::LastFiveSquaredError ? 5 : 1; }

std::size_t output_dim(LossKind kind) { return kind == LossKind::FinalNll ? 10 : 1; }

std::span<const double> Dataset::target(std::size_t i) const {
  if (i >= size()) throw ContractViolation("target index out of range");
  return std::span<const double>(targets).subspan(i * target_cols, target_cols);
}

std::size_t Dataset::label(std::size_t i) const {
  const auto t = target(i);
  return static_cast<std::size_t>(std::max_element(t.begin(), t.end()) - t.begin());
}

Tensor Dataset::batch_targets(std::span<const std::size_t> indices) const {
  Tensor out = Tensor::matrix(indices.size(), target_cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto t = target(indices[r]);
    std::copy(t.begin(), t.end(), out.storage().begin() + static_cast<std::ptrdiff_t>(r * target_cols));
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.loss = loss;
  out.inputs = SequenceSet(inputs.input_dim());
  out.target_cols = target_cols;
  for (std::size_t i : indices) {
    out.inputs.add(inputs.sequence(i), inputs.length(i));
    const auto t = target(i);
    out.targets.insert(out.targets.end(), t.begin(), t.end());
  }
  return out;
}

Dataset gen_copy_first_input(const CopyFirstInputSpec& spec) {
  if (spec.length < 1) throw ContractViolation("copy-first-input length must be >= 1");
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d;
  d.loss = LossKind::FinalSquaredError;
  d.inputs = SequenceSet(1);
  d.inputs.reserve(spec.samples, spec.samples * spec.length);
  d.target_cols = 1;
  std::vector<double> seq(spec.length);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    for (double& v : seq) v = normal(rng);
    d.inputs.add(seq, spec.length);
    d.targets.push_back(seq[0]);
  }
  return d;
}

Dataset gen_denoising(const DenoisingSpec& spec) {
  if (spec.forgetting < 5) throw ContractViolation("denoising forgetting period N must be >= 5");
  if (spec.length < spec.forgetting + 5) {
    throw ContractViolation("denoising needs T - N >= 5 (T = " + std::to_string(spec.length) +
                            ", N = " + std::to_string(spec.forgetting) + ")");
  }
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t range = spec.length - spec.forgetting;
  Dataset d;
  d.loss = LossKind::LastFiveSquaredError;
  d.inputs = SequenceSet(2);
  d.inputs.reserve(spec.samples, spec.samples * spec.length);
  d.target_cols = 5;
  std::vector<double> seq(2 * spec.length);
  std::vector<std::size_t> pool(range);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    for (std::size_t t = 0; t < spec.length; ++t) {
      seq[2 * t] = normal(rng);
      seq[2 * t + 1] = 0.0;
    }
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t k = 0; k < 5; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, range - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    std::vector<std::size_t> marks(pool.begin(), pool.begin() + 5);
    std::sort(marks.begin(), marks.end());
    for (std::size_t t : marks) {
      seq[2 * t + 1] = 1.0;
      d.targets.push_back(seq[2 * t]);
    }
    d.inputs.add(seq, spec.length);
  }
  return d;
}

std::vector<std::size_t> marked_steps(const Dataset& data, std::size_t i) {
  if (data.inputs.input_dim() != 2) throw ContractViolation("not a denoising dataset");
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < data.inputs.length(i); ++t)
    if (data.inputs.step(i, t)[1] != 0.0) out.push_back(t + 1);
  return out;
}

// --- MNIST -----------------------------------------------------------------

std::span<const double> MnistData::image(std::size_t i) const {
  if (i >= size()) throw ContractViolation("image index out of range");
  return std::span<const double>(pixels).subspan(i * rows * cols, rows * cols);
}

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

MnistData load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  if (img.size() < 16) throw ParseError(images.string() + ": truncated IDX header");
  if (lab.size() < 8) throw ParseError(labels.string() + ": truncated IDX header");
  if (be32(img, 0) != kImageMagic) {
    throw ParseError(images.string() + ": bad magic " + hex(be32(img, 0)) + ", expected " + hex(kImageMagic));
  }
  if (be32(lab, 0) != kLabelMagic) {
    throw ParseError(labels.string() + ": bad magic " + hex(be32(lab, 0)) + ", expected " + hex(kLabelMagic));
  }
  const std::size_t count = be32(img, 4);
  MnistData d;
  d.rows = be32(img, 8);
  d.cols = be32(img, 12);
  const std::size_t label_count = be32(lab, 4);
  if (count != label_count) {
    throw ParseError("count mismatch: " + images.string() + " has " + std::to_string(count) + " images, " +
                     labels.string() + " has " + std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = count * d.rows * d.cols;
  if (img.size() < 16 + pixels) {
    throw ParseError(images.string() + ": truncated, expected " + std::to_string(16 + pixels) + " bytes, got " +
                     std::to_string(img.size()));
  }
  if (lab.size() < 8 + count) {
    throw ParseError(labels.string() + ": truncated, expected " + std::to_string(8 + count) + " bytes, got " +
                     std::to_string(lab.size()));
  }
  d.pixels.resize(pixels);
  for (std::size_t i = 0; i < pixels; ++i) d.pixels[i] = static_cast<double>(img[16 + i]) / 255.0;
  d.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(count));
  for (std::size_t i = 0; i < count; ++i) {
    if (d.labels[i] > 9) {
      throw ParseError(labels.string() + ": label " + std::to_string(d.labels[i]) + " at index " +
                       std::to_string(i) + " is outside 0..9");
    }
  }
  return d;
}

void write_mnist_idx(const MnistData& data, const std::filesystem::path& images, const std::filesystem::path& labels) {
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img) throw IoError("cannot write " + images.string());
  if (!lab) throw IoError("cannot write " + labels.string());
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(data.size()));
  put_be32(img, static_cast<std::uint32_t>(data.rows));
  put_be32(img, static_cast<std::uint32_t>(data.cols));
  for (double p : data.pixels) img.put(static_cast<char>(static_cast<unsigned char>(std::lround(p * 255.0))));
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (std::uint8_t l : data.labels) lab.put(static_cast<char>(l));
}

std::vector<std::size_t> pixel_permutation(std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> p(size);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = size; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(p[i - 1], p[pick(rng)]);
  }
  return p;
}

Dataset make_permuted_sequences(const MnistData& images, const PermutedMnistSpec& spec) {
  const auto perm = pixel_permutation(images.rows * images.cols, spec.permutation_seed);
  return make_permuted_sequences(images, perm, spec.mode, spec.black_lines);
}

Dataset make_permuted_sequences(const MnistData& images, std::span<const std::size_t> permutation, MnistMode mode,
                                std::size_t black_lines) {
  const std::size_t area = images.rows * images.cols;
  if (permutation.size() != area) throw ContractViolation("permutation size does not match the image size");
  if (mode == MnistMode::Pixel && black_lines != 0) {
    throw ContractViolation("black lines are only defined for line mode");
  }
  Dataset d;
  d.loss = LossKind::FinalNll;
  const std::size_t dim = mode == MnistMode::Pixel ? 1 : images.cols;
  const std::size_t length = mode == MnistMode::Pixel ? area : images.rows + black_lines;
  d.inputs = SequenceSet(dim);
  d.inputs.reserve(images.size(), images.size() * length);
  d.target_cols = 10;
  d.targets.assign(images.size() * 10, 0.0);
  std::vector<double> seq(length * dim, 0.0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto img = images.image(i);
    for (std::size_t k = 0; k < area; ++k) seq[k] = img[permutation[k]];
    d.inputs.add(seq, length);
    d.targets[i * 10 + images.labels[i]] = 1.0;
  }
  return d;
}

// --- losses ------------------------------------------------------------------

namespace {

void check_outputs(LossKind kind, std::size_t count, std::size_t rows, std::size_t cols, const Tensor& targets) {
  if (count != scored_steps(kind)) {
    throw ContractViolation(std::string(to_string(kind)) + " expects " + std::to_string(scored_steps(kind)) +
                            " output steps, got " + std::to_string(count));
  }
  if (cols != output_dim(kind)) {
    throw ContractViolation(std::string(to_string(kind)) + " expects output width " +
                            std::to_string(output_dim(kind)) + ", got " + std::to_string(cols));
  }
  const std::size_t want = kind == LossKind::FinalNll ? 10 : scored_steps(kind);
  if (targets.rows() != rows || targets.cols() != want) {
    throw ContractViolation("targets " + ad::shape_string(targets.shape()) + " do not match " +
                            std::to_string(rows) + " outputs of " + std::string(to_string(kind)));
  }
}

}  // namespace

Var task_loss(LossKind kind, std::span<const Var> outputs, const Tensor& targets) {
  if (outputs.empty()) throw ContractViolation("task_loss needs outputs");
  const std::size_t rows = outputs[0].rows();
  check_outputs(kind, outputs.size(), rows, outputs[0].cols(), targets);
  const double inv = 1.0 / static_cast<double>(rows);
  switch (kind) {
    case LossKind::FinalSquaredError:
    case LossKind::LastFiveSquaredError: {
      const Var out = outputs.size() == 1 ? outputs[0] : ad::concat(outputs);
      return ad::scale(ad::sum(ad::square(ad::sub(out, Var(targets)))), inv);
    }
    case LossKind::FinalNll:
      return ad::scale(ad::sum(ad::mul(ad::log_softmax(outputs[0]), Var(targets))), -inv);
  }
  throw ContractViolation("unknown loss kind");
}

SampleScores score_batch(LossKind kind, std::span<const Tensor> outputs, const Tensor& targets) {
  if (outputs.empty()) throw ContractViolation("score_batch needs outputs");
  const std::size_t rows = outputs[0].rows();
  check_outputs(kind, outputs.size(), rows, outputs[0].cols(), targets);
  SampleScores s;
  s.losses.assign(rows, 0.0);
  if (kind == LossKind::FinalNll) {
    s.correct.assign(rows, false);
    for (std::size_t r = 0; r < rows; ++r) {
      const Tensor& o = outputs[0];
      double top = o.at(r, 0);
      std::size_t arg = 0;
      std::size_t label = 0;
      for (std::size_t c = 0; c < 10; ++c) {
        if (o.at(r, c) > top) {
          top = o.at(r, c);
          arg = c;
        }
        if (targets.at(r, c) > targets.at(r, label)) label = c;
      }
      double z = 0.0;
      for (std::size_t c = 0; c < 10; ++c) z += std::exp(o.at(r, c) - top);
      s.losses[r] = -(o.at(r, label) - top - std::log(z));
      s.correct[r] = arg == label;
    }
    return s;
  }
  for (std::size_t k = 0; k < outputs.size(); ++k)
    for (std::size_t r = 0; r < rows; ++r) {
      const double e = outputs[k].at(r, 0) - targets.at(r, k);
      s.losses[r] += e * e;
    }
  return s;
}

// --- cache -------------------------------------------------------------------

namespace {

constexpr char kDatasetMagic[8] = {'W', 'R', 'N', 'N', 'D', 'S', 'E', 'T'};

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ParseError(path.string() + ": truncated dataset file");
  return v;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kDatasetMagic, 8);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.loss));
  put<std::uint64_t>(out, data.inputs.input_dim());
  put<std::uint64_t>(out, data.target_cols);
  put<std::uint64_t>(out, data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    put<std::uint64_t>(out, data.inputs.length(i));
    const auto seq = data.inputs.sequence(i);
    out.write(reinterpret_cast<const char*>(seq.data()), static_cast<std::streamsize>(seq.size() * sizeof(double)));
    const auto t = data.target(i);
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kDatasetMagic, 8) != 0) {
    throw ParseError(path.string() + ": not a dataset cache (bad magic)");
  }
  if (get<std::uint32_t>(in, path) != 1) throw ParseError(path.string() + ": unsupported dataset version");
  const auto kind = get<std::uint32_t>(in, path);
  if (kind > 2) throw ParseError(path.string() + ": unknown loss kind " + std::to_string(kind));
  Dataset d;
  d.loss = static_cast<LossKind>(kind);
  const auto dim = get<std::uint64_t>(in, path);
  d.inputs = SequenceSet(dim);
  d.target_cols = get<std::uint64_t>(in, path);
  const auto count = get<std::uint64_t>(in, path);
  std::vector<double> seq;
  std::vector<double> target(d.target_cols);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint64_t>(in, path);
    if (len == 0 || len > (std::uint64_t{1} << 32)) throw ParseError(path.string() + ": bad sequence length");
    seq.resize(len * dim);
    if (!in.read(reinterpret_cast<char*>(seq.data()), static_cast<std::streamsize>(seq.size() * sizeof(double)))) {
      throw ParseError(path.string() + ": truncated dataset file");
    }
    if (!in.read(reinterpret_cast<char*>(target.data()),
                 static_cast<std::streamsize>(target.size() * sizeof(double)))) {
      throw ParseError(path.string() + ": truncated dataset file");
    }
    d.inputs.add(seq, len);
    d.targets.insert(d.targets.end(), target.begin(), target.end());
  }
  return d;
}

}  // namespace warmrnn::data
