#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "warmrnn/tensor.hpp"

namespace warmrnn::ad {

class Graph;

// Handle to a value, optionally recorded on a Graph.
//
// Unrecorded values (constants, or results computed only from constants)
// carry no graph bookkeeping, so forward passes that do not need gradients
// release intermediate tensors as soon as they go out of scope.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value);

  const Tensor& value() const { return *value_; }
  const Shape& shape() const { return value_->shape(); }
  std::size_t rows() const { return value_->rows(); }
  std::size_t cols() const { return value_->cols(); }
  bool recorded() const noexcept { return node_ >= 0; }
  bool empty() const noexcept { return value_ == nullptr; }
  Graph* graph() const noexcept { return graph_; }
  int node() const noexcept { return node_; }
  const std::shared_ptr<const Tensor>& value_ptr() const noexcept { return value_; }

 private:
  friend class Graph;
  friend Var detach(const Var& v);
  Var(Graph* graph, int node, std::shared_ptr<const Tensor> value)
      : graph_(graph), node_(node), value_(std::move(value)) {}

  Graph* graph_ = nullptr;
  int node_ = -1;
  std::shared_ptr<const Tensor> value_;
};

// Accumulates gradient contributions into the recorded parents of a node.
// `grads[i]` is null when parent i is not recorded.
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> grads)>;

// Append-only tape of operations for reverse-mode differentiation.
//
// Nodes are appended in evaluation order, so every node's parents precede it
// and a single reverse sweep visits each node exactly once.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Trainable leaf; receives a gradient on backward().
  Var leaf(Tensor value);

  // Record an operation. Returns an unrecorded Var when no operand is recorded.
  static Var record(std::shared_ptr<const Tensor> value, std::span<const Var> operands,
                    BackwardFn backward);

  // Reverse sweep from a single-element root. Gradients from an earlier sweep
  // are cleared first.
  void backward(const Var& root);

  // Gradient of the last backward() w.r.t. leaf `v`; zeros if `v` did not
  // participate. Interior gradients are released during the sweep.
  Tensor grad(const Var& v) const;

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    std::vector<int> parents;
    BackwardFn backward;
    Shape shape;
    Tensor grad;
    bool has_grad = false;
  };

  int append(Node node);

  std::vector<Node> nodes_;
};

// Detached copy of `v` (same value, no gradient path).
Var detach(const Var& v);
Var constant(Tensor value);

// --- primitives -----------------------------------------------------------
//
// Binary elementwise ops accept operands of equal shape, or one operand with
// a single row that is broadcast over the batch (rows) axis.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var scale(const Var& a, double factor);
Var shift(const Var& a, double offset);  // a + offset
Var one_minus(const Var& a);

Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);
// max(a, threshold); gradient is 0 where a == threshold.
Var max_with(const Var& a, double threshold);

Var sum(const Var& a);            // all elements -> scalar
Var sum_last(const Var& a);       // rows x cols -> rows x 1
Var mean(const Var& a);

struct MaxResult {
  Var values;                      // rows x 1
  std::vector<std::size_t> argmax; // per row, lowest index on ties
};
MaxResult max_last(const Var& a);

Var concat(std::span<const Var> parts);  // along the last axis
Var concat(const Var& a, const Var& b);
Var slice(const Var& a, std::size_t begin, std::size_t end);  // columns [begin, end)
Var gather_rows(const Var& a, std::span<const std::size_t> rows);
Var reshape(const Var& a, Shape shape);

// Euclidean norm over the last axis: rows x cols -> rows x 1.
// The gradient at the zero vector is the zero vector.
Var norm_last(const Var& a);

Var softmax(const Var& a);
Var log_softmax(const Var& a);

}  // namespace warmrnn::ad
