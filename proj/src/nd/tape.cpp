#include "sre/nd/tape.hpp"

#include <stdexcept>

namespace sre::nd {

const Tensor& Var::value() const {
  if (tape == nullptr) throw std::logic_error("Var is not bound to a tape");
  return tape->value(id);
}

Var Tape::leaf(Tensor value) {
  Node node;
  node.requires_grad = value.requires_grad();
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(const Tensor& value) {
  Tensor copy = value;
  copy.set_requires_grad(true);
  return leaf(std::move(copy));
}

Var Tape::constant(Tensor value) {
  value.set_requires_grad(false);
  return leaf(std::move(value));
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  const std::size_t self = nodes_.size();
  bool needs = false;
  for (auto in : inputs) {
    if (in >= self) throw std::invalid_argument("tape input refers to a node that does not precede it");
    needs = needs || nodes_[in].requires_grad;
  }
  Node node;
  node.value = std::move(value);
  node.inputs = std::move(inputs);
  node.requires_grad = needs;
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, self};
}

Tensor& Tape::grad_slot(std::size_t id) {
  auto& node = nodes_.at(id);
  if (!node.grad) node.grad.emplace(node.value.shape(), 0.0);
  return *node.grad;
}

const Tensor& Tape::grad(Var v) {
  if (v.tape != this) throw std::invalid_argument("Var belongs to a different tape");
  return grad_slot(v.id);
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("loss belongs to a different tape");
  if (loss.id >= nodes_.size()) throw std::invalid_argument("loss node does not exist");
  if (nodes_[loss.id].value.size() != 1)
    throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                shape_string(nodes_[loss.id].value.shape()));
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (auto in : nodes_[i].inputs)
      if (in >= i) throw std::logic_error("tape is not topologically ordered");
    nodes_[i].grad.reset();
  }
  grad_slot(loss.id).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.grad || !node.backward) continue;
    node.backward(*this, i);
  }
}

}  // namespace sre::nd
