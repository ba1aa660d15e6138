#pragma once

#include "prcnn/nn/tensor.hpp"

#include <deque>
#include <functional>

namespace prcnn::nn {

template <typename S>
class Tape;

// Handle to a value recorded on a tape.
template <typename S>
struct Var {
  Tape<S>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<S>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape; }
  Index dim(int axis) const { return value().dim(axis); }
};

// Reverse-mode tape. Nodes are appended in execution order and replayed
// backwards; every node retains its output until the tape is destroyed.
template <typename S>
class Tape {
 public:
  using Vector = typename Tensor<S>::Vector;
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> leaf(Tensor<S> value, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(value), Vector(), requires_grad, nullptr});
    return {this, nodes_.size() - 1};
  }

  // Records an op output. The node tracks gradients iff any input does.
  Var<S> record(Tensor<S> value, std::initializer_list<Var<S>> inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || requires_grad(in);
    return push(std::move(value), needs, std::move(backward));
  }
  Var<S> record(Tensor<S> value, const std::vector<Var<S>>& inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || requires_grad(in);
    return push(std::move(value), needs, std::move(backward));
  }

  const Tensor<S>& value(Var<S> v) const { return nodes_[v.id].value; }
  const Tensor<S>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(Var<S> v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient of the last backward() target with respect to v (zeros if unreached).
  Vector grad(Var<S> v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0) return Vector::Zero(n.value.size());
    return n.grad;
  }

  const Vector& output_grad(std::size_t id) const { return nodes_[id].grad; }

  // Zero-initialized on first touch.
  Vector& grad_accumulator(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Vector::Zero(n.value.size());
    return n.grad;
  }

  void backward(Var<S> target) {
    if (value(target).size() != 1) throw DimensionError("backward target must be a scalar");
    for (auto& n : nodes_) n.grad.resize(0);
    if (!requires_grad(target)) return;
    grad_accumulator(target.id).setOnes();
    for (std::size_t i = target.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
      n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<S> value;
    Vector grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var<S> push(Tensor<S> value, bool needs, Backward backward) {
    nodes_.push_back(Node{std::move(value), Vector(), needs, needs ? std::move(backward) : nullptr});
    return {this, nodes_.size() - 1};
  }

  std::deque<Node> nodes_;
};

}  // namespace prcnn::nn
