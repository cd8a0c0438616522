#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sre/nd/optim.hpp"
#include "sre/nd/rng.hpp"
#include "sre/nd/tape.hpp"
#include "sre/nd/tensor.hpp"

namespace sre::nd {

/// Ordered, named parameter tensors of one model.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;
  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  /// Registers every tensor as a trainable leaf, in order.
  std::vector<Var> bind(Tape& tape) const;

  /// Replaces values from a checkpoint; names and shapes must match.
  void assign(std::span<const NamedTensor> values);
  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<NamedTensor> tensors_;
};

/// Adam over every tensor of a ParameterSet.
class Adam {
 public:
  Adam() = default;
  Adam(const ParameterSet& params, AdamConfig config);

  /// Applies one update from the gradients of `bound` (as returned by bind)
  /// after optional global-norm clipping (max_grad_norm <= 0 disables it).
  /// Returns the pre-clip gradient norm.
  double step(ParameterSet& params, Tape& tape, std::span<const Var> bound, double max_grad_norm = 0.0);
  void set_learning_rate(double lr);

 private:
  std::vector<AdamState> states_;
};

/// Uniform(-a, a) with a = gain * sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Rng& rng, Shape shape, std::size_t fan_in, std::size_t fan_out, double gain = 1.0);

}  // namespace sre::nd
