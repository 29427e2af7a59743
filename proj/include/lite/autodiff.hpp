#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lite/tensor.hpp"

namespace lite {

// A trainable tensor with its gradient accumulator.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T{0}); }
};

template <typename T>
class Graph;

// Handle to a node recorded on a Graph.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* g, int id) : graph_(g), id_(id) {}

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  int id() const { return id_; }
  Graph<T>& graph() const { return *graph_; }
  bool valid() const { return graph_ != nullptr && id_ >= 0; }

 private:
  Graph<T>* graph_ = nullptr;
  int id_ = -1;
};

// Receives the output gradient and one pointer per input; a pointer is null
// when that input does not require a gradient.
template <typename T>
using BackwardFn =
    std::function<void(const Tensor<T>& out_grad, std::span<Tensor<T>*> in_grads)>;

// Append-only tape. Nodes are created in topological order, so a reverse
// sweep over ids visits every node exactly once.
template <typename T>
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var<T> constant(Tensor<T> value) { return push(std::move(value), {}, nullptr, false); }

  // Leaf whose gradient is kept on the node (inputs under gradient checks).
  Var<T> leaf(Tensor<T> value) { return push(std::move(value), {}, nullptr, record_); }

  Var<T> param(Parameter<T>& p) {
    Var<T> v = push(p.value, {}, nullptr, record_);
    nodes_[v.id()].param = &p;
    return v;
  }

  Var<T> op(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> fn) {
    bool needs = false;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const auto& in : inputs) {
      if (&in.graph() != this) throw std::logic_error("operand from a different graph");
      ids.push_back(in.id());
      needs = needs || nodes_[in.id()].requires_grad;
    }
    if (!record_ || !needs) return push(std::move(value), {}, nullptr, false);
    return push(std::move(value), std::move(ids), std::move(fn), true);
  }

  const Tensor<T>& value(int id) const { return nodes_.at(id).value; }

  const Tensor<T>& grad(const Var<T>& v) const {
    const auto& n = nodes_.at(v.id());
    if (n.grad.empty()) throw std::logic_error("no gradient recorded for node");
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar loss. Parameter gradients are accumulated
  // into Parameter::grad.
  void backward(const Var<T>& loss) {
    if (!record_) throw std::logic_error("backward on a non-recording graph");
    if (nodes_.empty() || !loss.valid() || &loss.graph() != this ||
        loss.id() >= static_cast<int>(nodes_.size())) {
      throw std::logic_error("backward called before a forward pass was recorded");
    }
    if (done_) throw std::logic_error("backward already run on this graph");
    auto& root = nodes_[loss.id()];
    if (root.value.size() != 1) {
      throw ShapeError("backward needs a scalar loss, got " + shape_str(root.value.shape()));
    }
    done_ = true;
    if (!root.requires_grad) return;
    root.grad = Tensor<T>(root.value.shape(), T{1});

    std::vector<Tensor<T>*> in_grads;
    for (int id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) {
        in_grads.assign(n.inputs.size(), nullptr);
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          Node& in = nodes_[n.inputs[i]];
          if (!in.requires_grad) continue;
          if (in.grad.empty()) in.grad = Tensor<T>(in.value.shape());
          in_grads[i] = &in.grad;
        }
        n.backward(n.grad, in_grads);
        n.backward = nullptr;
      }
      if (n.param != nullptr) n.param->grad += n.grad;
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<int> inputs;
    BackwardFn<T> backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  Var<T> push(Tensor<T> value, std::vector<int> inputs, BackwardFn<T> fn, bool req) {
    nodes_.push_back(Node{std::move(value), {}, std::move(inputs), std::move(fn), nullptr, req});
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::deque<Node> nodes_;  // stable references across push_back
  bool record_;
  bool done_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}

}  // namespace lite
