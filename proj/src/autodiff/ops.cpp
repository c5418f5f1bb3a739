#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "warmrnn/errors.hpp"
#include "warmrnn/graph.hpp"

namespace warmrnn::ad {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

using TensorPtr = std::shared_ptr<const Tensor>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

MatMap as_matrix(Tensor& t) {
  return MatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

Var finish(Tensor out, std::initializer_list<Var> operands, BackwardFn fn) {
  std::vector<Var> ops(operands);
  bool any = std::any_of(ops.begin(), ops.end(), [](const Var& v) { return v.recorded(); });
  auto value = std::make_shared<const Tensor>(std::move(out));
  if (!any) return Graph::record(std::move(value), ops, {});
  return Graph::record(std::move(value), ops, std::move(fn));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ContractViolation(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                          shape_string(b));
}

struct Broadcast {
  std::size_t rows;
  std::size_t cols;
  std::size_t a_stride;  // 0 when a is broadcast
  std::size_t b_stride;
  Shape shape;
};

Broadcast broadcast(const char* op, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) shape_error(op, a.shape(), b.shape());
  const std::size_t ra = a.rows();
  const std::size_t rb = b.rows();
  if (ra == rb) {
    const Shape& shape = a.rank() >= b.rank() ? a.shape() : b.shape();
    return {ra, a.cols(), a.cols(), b.cols(), shape};
  }
  if (rb == 1) return {ra, a.cols(), a.cols(), 0, a.shape()};
  if (ra == 1) return {rb, a.cols(), 0, b.cols(), b.shape()};
  shape_error(op, a.shape(), b.shape());
}

// Adds `g` into `dst`, summing over rows when `dst` was broadcast.
void accumulate_broadcast(Tensor& dst, const Tensor& g, const Broadcast& bc, std::size_t stride) {
  if (stride != 0) {
    auto& d = dst.storage();
    const auto gs = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += gs[i];
    return;
  }
  for (std::size_t r = 0; r < bc.rows; ++r) {
    for (std::size_t c = 0; c < bc.cols; ++c) dst[c] += g[r * bc.cols + c];
  }
}

template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  Tensor out(a.shape());
  const auto x = a.value().data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  TensorPtr in = a.value_ptr();
  TensorPtr res = std::make_shared<const Tensor>(std::move(out));
  if (!a.recorded()) return Graph::record(res, std::span<const Var>(&a, 1), {});
  return Graph::record(res, std::span<const Var>(&a, 1),
                       [in, res, deriv](const Tensor& g, std::span<Tensor* const> grads) {
                         const auto xs = in->data();
                         const auto ys = res->data();
                         auto& d = grads[0]->storage();
                         for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * deriv(xs[i], ys[i]);
                       });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() > 2 || av.cols() != bv.rows()) shape_error("matmul", av.shape(), bv.shape());
  Shape shape = av.shape();
  if (shape.empty()) shape = {1};
  shape.back() = bv.cols();
  Tensor out(shape);
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  TensorPtr ap = a.value_ptr();
  TensorPtr bp = b.value_ptr();
  return finish(std::move(out), {a, b}, [ap, bp](const Tensor& g, std::span<Tensor* const> grads) {
    auto gm = as_matrix(g);
    if (grads[0]) as_matrix(*grads[0]).noalias() += gm * as_matrix(*bp).transpose();
    if (grads[1]) as_matrix(*grads[1]).noalias() += as_matrix(*ap).transpose() * gm;
  });
}

Var add(const Var& a, const Var& b) {
  const Broadcast bc = broadcast("add", a.value(), b.value());
  Tensor out(bc.shape);
  const auto x = a.value().data();
  const auto y = b.value().data();
  for (std::size_t r = 0; r < bc.rows; ++r) {
    const double* xr = x.data() + r * bc.a_stride;
    const double* yr = y.data() + r * bc.b_stride;
    double* o = out.data().data() + r * bc.cols;
    for (std::size_t c = 0; c < bc.cols; ++c) o[c] = xr[c] + yr[c];
  }
  return finish(std::move(out), {a, b}, [bc](const Tensor& g, std::span<Tensor* const> grads) {
    if (grads[0]) accumulate_broadcast(*grads[0], g, bc, bc.a_stride);
    if (grads[1]) accumulate_broadcast(*grads[1], g, bc, bc.b_stride);
  });
}

Var sub(const Var& a, const Var& b) {
  const Broadcast bc = broadcast("sub", a.value(), b.value());
  Tensor out(bc.shape);
  const auto x = a.value().data();
  const auto y = b.value().data();
  for (std::size_t r = 0; r < bc.rows; ++r) {
    const double* xr = x.data() + r * bc.a_stride;
    const double* yr = y.data() + r * bc.b_stride;
    double* o = out.data().data() + r * bc.cols;
    for (std::size_t c = 0; c < bc.cols; ++c) o[c] = xr[c] - yr[c];
  }
  return finish(std::move(out), {a, b}, [bc](const Tensor& g, std::span<Tensor* const> grads) {
    if (grads[0]) accumulate_broadcast(*grads[0], g, bc, bc.a_stride);
    if (grads[1]) {
      Tensor neg = g;
      for (double& v : neg.storage()) v = -v;
      accumulate_broadcast(*grads[1], neg, bc, bc.b_stride);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  const Broadcast bc = broadcast("mul", a.value(), b.value());
  Tensor out(bc.shape);
  const auto x = a.value().data();
  const auto y = b.value().data();
  for (std::size_t r = 0; r < bc.rows; ++r) {
    const double* xr = x.data() + r * bc.a_stride;
    const double* yr = y.data() + r * bc.b_stride;
    double* o = out.data().data() + r * bc.cols;
    for (std::size_t c = 0; c < bc.cols; ++c) o[c] = xr[c] * yr[c];
  }
  TensorPtr ap = a.value_ptr();
  TensorPtr bp = b.value_ptr();
  return finish(std::move(out), {a, b}, [bc, ap, bp](const Tensor& g, std::span<Tensor* const> grads) {
    for (int side = 0; side < 2; ++side) {
      Tensor* dst = grads[static_cast<std::size_t>(side)];
      if (!dst) continue;
      const Tensor& other = side == 0 ? *bp : *ap;
      const std::size_t other_stride = side == 0 ? bc.b_stride : bc.a_stride;
      const std::size_t own_stride = side == 0 ? bc.a_stride : bc.b_stride;
      for (std::size_t r = 0; r < bc.rows; ++r) {
        const double* gr = g.data().data() + r * bc.cols;
        const double* orow = other.data().data() + r * other_stride;
        double* d = dst->data().data() + r * own_stride;
        for (std::size_t c = 0; c < bc.cols; ++c) d[c] += gr[c] * orow[c];
      }
    }
  });
}

Var div(const Var& a, const Var& b) {
  const Broadcast bc = broadcast("div", a.value(), b.value());
  Tensor out(bc.shape);
  const auto x = a.value().data();
  const auto y = b.value().data();
  for (std::size_t r = 0; r < bc.rows; ++r) {
    const double* xr = x.data() + r * bc.a_stride;
    const double* yr = y.data() + r * bc.b_stride;
    double* o = out.data().data() + r * bc.cols;
    for (std::size_t c = 0; c < bc.cols; ++c) o[c] = xr[c] / yr[c];
  }
  TensorPtr bp = b.value_ptr();
  auto res = std::make_shared<const Tensor>(std::move(out));
    std::vector<Var> ops{a, b};
  BackwardFn fn;
  if (a.recorded() || b.recorded()) {
    fn = [bc, bp, res](const Tensor& g, std::span<Tensor* const> grads) {
      const auto& q = res;
      for (std::size_t r = 0; r < bc.rows; ++r) {
        const double* gr = g.data().data() + r * bc.cols;
        const double* br = bp->data().data() + r * bc.b_stride;
        const double* qr = q->data().data() + r * bc.cols;
        if (grads[0]) {
          double* d = grads[0]->data().data() + r * bc.a_stride;
          for (std::size_t c = 0; c < bc.cols; ++c) d[c] += gr[c] / br[c];
        }
        if (grads[1]) {
          double* d = grads[1]->data().data() + r * bc.b_stride;
          // Written as -(g*q)/b so a zero quotient never meets an infinite 1/b^2.
          for (std::size_t c = 0; c < bc.cols; ++c) d[c] -= (gr[c] * qr[c]) / br[c];
        }
      }
    };
  }
  return Graph::record(res, ops, std::move(fn));
}

Var scale(const Var& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Var shift(const Var& a, double offset) {
  return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var one_minus(const Var& a) {
  return unary(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(const Var& a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var max_with(const Var& a, double threshold) {
  return unary(
      a, [threshold](double x) { return x > threshold ? x : threshold; },
      [threshold](double x, double) { return x > threshold ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return finish(Tensor::scalar(total), {a}, [](const Tensor& g, std::span<Tensor* const> grads) {
    const double gv = g[0];
    for (double& d : grads[0]->storage()) d += gv;
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_last(const Var& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  Tensor out(Shape{rows, 1});
  const auto x = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += x[r * cols + c];
    out[r] = s;
  }
  return finish(std::move(out), {a}, [rows, cols](const Tensor& g, std::span<Tensor* const> grads) {
    auto& d = grads[0]->storage();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[r];
  });
}

MaxResult max_last(const Var& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  if (cols == 0) throw ContractViolation("max_last: empty last axis");
  Tensor out(Shape{rows, 1});
  std::vector<std::size_t> arg(rows, 0);
  const auto x = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (x[r * cols + c] > x[r * cols + best]) best = c;
    arg[r] = best;
    out[r] = x[r * cols + best];
  }
  Var values = finish(std::move(out), {a}, [arg, cols](const Tensor& g, std::span<Tensor* const> grads) {
    auto& d = grads[0]->storage();
    for (std::size_t r = 0; r < arg.size(); ++r) d[r * cols + arg[r]] += g[r];
  });
  return {std::move(values), std::move(arg)};
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractViolation("concat: no operands");
  const std::size_t rows = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    if (p.rows() != rows) shape_error("concat", parts[0].shape(), p.shape());
    widths.push_back(p.cols());
    total += p.cols();
  }
  Shape shape = parts[0].shape();
  if (shape.empty()) shape = {1};
  shape.back() = total;
  Tensor out(shape);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const auto src = p.value().data();
    const std::size_t w = p.cols();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(src.data() + r * w, w, out.data().data() + r * total + offset);
    offset += w;
  }
  std::vector<Var> ops(parts.begin(), parts.end());
  BackwardFn fn;
  if (std::any_of(ops.begin(), ops.end(), [](const Var& v) { return v.recorded(); })) {
    fn = [widths, rows, total](const Tensor& g, std::span<Tensor* const> grads) {
      std::size_t off = 0;
      for (std::size_t i = 0; i < widths.size(); ++i) {
        const std::size_t w = widths[i];
        if (grads[i]) {
          double* d = grads[i]->data().data();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c) d[r * w + c] += g[r * total + off + c];
        }
        off += w;
      }
    };
  }
  return Graph::record(std::make_shared<const Tensor>(std::move(out)), ops, std::move(fn));
}

Var concat(const Var& a, const Var& b) {
  const Var parts[] = {a, b};
  return concat(std::span<const Var>(parts));
}

Var slice(const Var& a, std::size_t begin, std::size_t end) {
  const std::size_t cols = a.cols();
  if (begin > end || end > cols) {
    throw ContractViolation("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") out of range for shape " + shape_string(a.shape()));
  }
  const std::size_t rows = a.rows();
  const std::size_t w = end - begin;
  Shape shape = a.shape();
  if (shape.empty()) shape = {1};
  shape.back() = w;
  Tensor out(shape);
  const auto x = a.value().data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(x.data() + r * cols + begin, w, out.data().data() + r * w);
  return finish(std::move(out), {a}, [rows, cols, begin, w](const Tensor& g, std::span<Tensor* const> grads) {
    double* d = grads[0]->data().data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) d[r * cols + begin + c] += g[r * w + c];
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> rows) {
  const std::size_t n = a.rows();
  const std::size_t cols = a.cols();
  Tensor out(Shape{rows.size(), cols});
  const auto x = a.value().data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw ContractViolation("gather_rows: row " + std::to_string(rows[i]) + " out of range for shape " +
                              shape_string(a.shape()));
    }
    std::copy_n(x.data() + rows[i] * cols, cols, out.data().data() + i * cols);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return finish(std::move(out), {a}, [idx, cols](const Tensor& g, std::span<Tensor* const> grads) {
    double* d = grads[0]->data().data();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) d[idx[i] * cols + c] += g[i * cols + c];
  });
}

Var reshape(const Var& a, Shape shape) {
  if (shape_size(shape) != a.value().size()) shape_error("reshape", a.shape(), shape);
  Tensor out(std::move(shape), std::vector<double>(a.value().data().begin(), a.value().data().end()));
  return finish(std::move(out), {a}, [](const Tensor& g, std::span<Tensor* const> grads) {
    auto& d = grads[0]->storage();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  });
}

Var norm_last(const Var& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  Tensor out(Shape{rows, 1});
  const auto x = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += x[r * cols + c] * x[r * cols + c];
    out[r] = std::sqrt(s);
  }
  TensorPtr in = a.value_ptr();
  auto res = std::make_shared<const Tensor>(std::move(out));
    BackwardFn fn;
  if (a.recorded()) {
    fn = [in, res, rows, cols](const Tensor& g, std::span<Tensor* const> grads) {
      const auto& y = res;
      double* d = grads[0]->data().data();
      const double* xs = in->data().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double n = (*y)[r];
        if (n == 0.0) continue;
        const double k = g[r] / n;
        for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += k * xs[r * cols + c];
      }
    };
  }
  return Graph::record(res, std::span<const Var>(&a, 1), std::move(fn));
}

Var softmax(const Var& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  Tensor out(a.shape());
  const auto x = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* o = out.data().data() + r * cols;
    const double m = *std::max_element(xr, xr + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (o[c] = std::exp(xr[c] - m));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
  }
  auto res = std::make_shared<const Tensor>(std::move(out));
    BackwardFn fn;
  if (a.recorded()) {
    fn = [res, rows, cols](const Tensor& g, std::span<Tensor* const> grads) {
      const auto& y = res;
      double* d = grads[0]->data().data();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * (*y)[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += (*y)[r * cols + c] * (g[r * cols + c] - dot);
      }
    };
  }
  return Graph::record(res, std::span<const Var>(&a, 1), std::move(fn));
}

Var log_softmax(const Var& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  Tensor out(a.shape());
  const auto x = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* o = out.data().data() + r * cols;
    const double m = *std::max_element(xr, xr + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(xr[c] - m);
    const double lse = m + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) o[c] = xr[c] - lse;
  }
  auto res = std::make_shared<const Tensor>(std::move(out));
    BackwardFn fn;
  if (a.recorded()) {
    fn = [res, rows, cols](const Tensor& g, std::span<Tensor* const> grads) {
      const auto& y = res;
      double* d = grads[0]->data().data();
      for (std::size_t r = 0; r < rows; ++r) {
        double gs = 0.0;
        for (std::size_t c = 0; c < cols; ++c) gs += g[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
          d[r * cols + c] += g[r * cols + c] - std::exp((*y)[r * cols + c]) * gs;
      }
    };
  }
  return Graph::record(res, std::span<const Var>(&a, 1), std::move(fn));
}

}  // namespace warmrnn::ad
