#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "sre/nd/tensor.hpp"

namespace sre::nd {

class Tape;

/// Handle to a node recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode recording of primitive applications.
///
/// Nodes are appended in execution order, so every node's inputs have a
/// smaller id. `backward` walks the nodes once in reverse and accumulates
/// into per-node gradient slots. Leaves created with requires_grad receive
/// d(loss)/d(leaf); leaves that the loss does not depend on get zeros.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var parameter(const Tensor& value);  // leaf with requires_grad forced on
  Var constant(Tensor value);          // leaf without gradient

  /// Appends an op node. `inputs` must refer to existing nodes.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor& value(Var v) const { return value(v.id); }

  /// Gradient of the last backward pass with respect to `v`; zeros if unused.
  const Tensor& grad(Var v);

  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t input(std::size_t id, std::size_t k) const { return nodes_.at(id).inputs.at(k); }

  /// Gradient slot used by backward functions; allocated as zeros on first use.
  Tensor& grad_slot(std::size_t id);

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::optional<Tensor> grad;
  };
  std::vector<Node> nodes_;
};

}  // namespace sre::nd
