#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "csifb/errors.hpp"
#include "csifb/numcore/parameter.hpp"
#include "csifb/numcore/tensor.hpp"

namespace csifb::numcore {

template <typename T>
class Tape;

// Handle to a value recorded on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(*this); }
  bool requires_grad() const { return tape->requires_grad(*this); }
};

class EmptyTapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Records executed primitives in execution order and replays their adjoints
// in reverse. One tape per forward pass; tapes are not shared across threads.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf without gradient.
  Var<T> constant(Tensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
    return {this, nodes_.size() - 1};
  }

  // Leaf whose gradient is added into `p.grad` by backward().
  Var<T> parameter(Parameter<T>& p) {
    nodes_.push_back(Node{p.value, {}, {}, &p, true});
    return {this, nodes_.size() - 1};
  }

  // Leaf that collects a gradient without a backing Parameter.
  Var<T> variable(Tensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, true});
    return {this, nodes_.size() - 1};
  }

  // Primitive output. `backward` reads grad(out) and accumulates into inputs.
  Var<T> record(Tensor<T> value, bool requires_grad, Backward backward) {
    nodes_.push_back(
        Node{std::move(value), {}, requires_grad ? std::move(backward) : Backward{},
             nullptr, requires_grad});
    return {this, nodes_.size() - 1};
  }

  const Tensor<T>& value(Var<T> v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var<T> v) const { return nodes_.at(v.id).requires_grad; }

  // Gradient of a node; zero-initialized on first access.
  Tensor<T>& grad(Var<T> v) { return grad(v.id); }
  Tensor<T>& grad(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }
  bool has_grad(Var<T> v) const { return !nodes_.at(v.id).grad.empty(); }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }

  // Seeds d(loss)/d(loss) = 1 and replays every recorded op once, newest first.
  void backward(Var<T> loss) {
    if (nodes_.empty()) throw EmptyTapeError("backward called on an empty tape");
    if (loss.tape != this) throw InvalidInput("loss belongs to a different tape");
    if (value(loss).size() != 1) throw DimensionError("backward requires a scalar loss");
    grad(loss).fill(T{1});
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(*this);
      if (n.param != nullptr) {
        auto& pg = n.param->grad;
        for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
      }
    }
  }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Backward backward;
    Parameter<T>* param;
    bool requires_grad;
  };

  std::vector<Node> nodes_;
};

}  // namespace csifb::numcore
