#include "warmrnn/parameters.hpp"

#include <bit>
#include <cmath>
#include <algorithm>
#include <cstring>
#include <fstream>

#include "warmrnn/errors.hpp"

namespace warmrnn::ad {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  if (find(name)) throw ContractViolation("duplicate parameter name '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

std::vector<Var> ParameterSet::bind(Graph& graph) const {
  std::vector<Var> out;
  out.reserve(values_.size());
  for (const Tensor& t : values_) out.push_back(graph.leaf(t));
  return out;
}

std::vector<Var> ParameterSet::constants() const {
  std::vector<Var> out;
  out.reserve(values_.size());
  for (const Tensor& t : values_) out.emplace_back(t);
  return out;
}

std::uint64_t ParameterSet::hash() const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (std::size_t i = 0; i < values_.size(); ++i) {
    mix(names_[i].data(), names_[i].size());
    for (std::size_t d : values_[i].shape()) {
      const std::uint64_t dim = d;
      mix(&dim, sizeof dim);
    }
    mix(values_[i].data().data(), values_[i].size() * sizeof(double));
  }
  return h;
}

namespace {

constexpr char kMagic[8] = {'W', 'R', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ParseError("truncated checkpoint " + path.string());
  return v;
}

}  // namespace

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    const Tensor& t = params[i];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw ParseError("bad checkpoint magic in " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint64_t>(in, path);
  ParameterSet params;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = get<std::uint32_t>(in, path);
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in, path);
    std::vector<double> values(shape_size(shape));
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw ParseError("truncated checkpoint " + path.string());
    params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return params;
}

GradCheckResult gradient_check(const ScalarFn& f, std::span<const Tensor> params, double step,
                               double tolerance) {
  if (!(step > 0.0)) throw ContractViolation("gradient_check: step must be positive");

  Graph graph;
  std::vector<Var> leaves;
  for (const Tensor& t : params) leaves.push_back(graph.leaf(t));
  Var root = f(leaves);
  if (!std::isfinite(root.value().item())) throw DivergenceError("gradient_check: f is not finite at the base point");
  std::vector<Tensor> analytic;
  if (root.recorded()) {
    graph.backward(root);
    for (const Var& v : leaves) analytic.push_back(graph.grad(v));
  } else {
    for (const Tensor& t : params) analytic.emplace_back(t.shape(), 0.0);
  }

  std::vector<Tensor> work(params.begin(), params.end());
  auto evaluate = [&]() {
    std::vector<Var> consts;
    consts.reserve(work.size());
    for (const Tensor& t : work) consts.emplace_back(t);
    return f(consts).value().item();
  };

  GradCheckResult result;
  for (std::size_t p = 0; p < work.size(); ++p) {
    for (std::size_t i = 0; i < work[p].size(); ++i) {
      const double saved = work[p][i];
      work[p][i] = saved + step;
      const double plus = evaluate();
      work[p][i] = saved - step;
      const double minus = evaluate();
      work[p][i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw DivergenceError("gradient_check: f is not finite when perturbing parameter " +
                              std::to_string(p) + " component " + std::to_string(i));
      }
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      result.max_abs_gradient = std::max(result.max_abs_gradient, std::abs(a));
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_tensor = p;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  result.passed = result.max_relative_error <= tolerance;
  return result;
}

}  // namespace warmrnn::ad
