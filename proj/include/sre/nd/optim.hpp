#pragma once

#include <cstdint>
#include <span>

#include "sre/nd/tensor.hpp"

namespace sre::nd {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter tensor.
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  Tensor first_moment;
  Tensor second_moment;

  AdamState() = default;
  AdamState(const Shape& shape, AdamConfig cfg)
      : config(cfg), first_moment(shape), second_moment(shape) {}
};

/// Bias-corrected Adam update of `params` in place.
void adam_step(Tensor& params, const Tensor& grads, AdamState& state);

/// Scales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<Tensor> grads, double max_norm);

}  // namespace sre::nd
