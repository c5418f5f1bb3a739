#include "warmrnn/graph.hpp"

#include "warmrnn/errors.hpp"

namespace warmrnn::ad {

Var::Var(Tensor value) : value_(std::make_shared<const Tensor>(std::move(value))) {}

Var constant(Tensor value) { return Var(std::move(value)); }

Var detach(const Var& v) {
  Var out;
  out.value_ = v.value_ptr();
  return out;
}

int Graph::append(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size() - 1);
}

Var Graph::leaf(Tensor value) {
  Node node;
  node.shape = value.shape();
  int index = append(std::move(node));
  return Var(this, index, std::make_shared<const Tensor>(std::move(value)));
}

Var Graph::record(std::shared_ptr<const Tensor> value, std::span<const Var> operands,
                  BackwardFn backward) {
  Graph* graph = nullptr;
  for (const Var& op : operands) {
    if (!op.recorded()) continue;
    if (graph != nullptr && graph != op.graph()) {
      throw ContractViolation("operands recorded on different graphs");
    }
    graph = op.graph();
  }
  if (graph == nullptr) return Var(nullptr, -1, std::move(value));

  Node node;
  node.parents.reserve(operands.size());
  for (const Var& op : operands) node.parents.push_back(op.recorded() ? op.node() : -1);
  node.backward = std::move(backward);
  node.shape = value->shape();
  int index = graph->append(std::move(node));
  return Var(graph, index, std::move(value));
}

void Graph::backward(const Var& root) {
  if (!root.recorded() || root.graph() != this) {
    throw ContractViolation("backward root is not recorded on this graph");
  }
  if (root.value().size() != 1) {
    throw ContractViolation("backward root must be scalar, got shape " + shape_string(root.shape()));
  }
  for (Node& n : nodes_) {
    n.grad = Tensor{};
    n.has_grad = false;
  }
  Node& start = nodes_[static_cast<std::size_t>(root.node())];
  start.grad = Tensor(start.shape, 1.0);
  start.has_grad = true;

  std::vector<Tensor*> parent_grads;
  for (int i = root.node(); i >= 0; --i) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (!node.has_grad || !node.backward) continue;
    parent_grads.assign(node.parents.size(), nullptr);
    for (std::size_t p = 0; p < node.parents.size(); ++p) {
      int idx = node.parents[p];
      if (idx < 0) continue;
      Node& parent = nodes_[static_cast<std::size_t>(idx)];
      if (!parent.has_grad) {
        parent.grad = Tensor(parent.shape, 0.0);
        parent.has_grad = true;
      }
      parent_grads[p] = &parent.grad;
    }
    node.backward(node.grad, parent_grads);
    // Interior gradients are no longer needed once propagated.
    if (!node.parents.empty()) {
      node.grad = Tensor{};
      node.has_grad = false;
    }
  }
}

Tensor Graph::grad(const Var& v) const {
  if (v.recorded() && v.graph() == this) {
    const Node& node = nodes_[static_cast<std::size_t>(v.node())];
    if (node.has_grad) return node.grad;
  }
  return Tensor(v.shape(), 0.0);
}

}  // namespace warmrnn::ad
