#include "sre/nd/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace sre::nd {

void adam_step(Tensor& params, const Tensor& grads, AdamState& state) {
  if (params.shape() != grads.shape())
    throw std::invalid_argument("adam_step: gradient shape " + shape_string(grads.shape()) +
                                " does not match parameter shape " + shape_string(params.shape()));
  if (state.first_moment.shape() != params.shape()) {
    if (state.step_count != 0) throw std::invalid_argument("adam_step: state shape mismatch");
    state.first_moment = Tensor(params.shape());
    state.second_moment = Tensor(params.shape());
  }
  const auto& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

double clip_grad_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g.values()) v *= f;
  }
  return norm;
}

}  // namespace sre::nd
