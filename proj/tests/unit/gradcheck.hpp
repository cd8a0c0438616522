#pragma once

// Central finite-difference oracle for tape gradients. Test-only.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "sre/nd/ops.hpp"
#include "sre/nd/rng.hpp"
#include "sre/nd/tape.hpp"

namespace sre::testing {

using Builder = std::function<nd::Var(nd::Tape&, const std::vector<nd::Var>&)>;

inline double evaluate(const Builder& build, const std::vector<nd::Tensor>& inputs) {
  nd::Tape tape;
  std::vector<nd::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.parameter(t));
  return build(tape, leaves).value().item();
}

/// Largest per-input relative error ||analytic - numeric|| / max(||analytic||, ||numeric||).
inline double max_gradient_error(const Builder& build, const std::vector<nd::Tensor>& inputs, double h = 1e-5) {
  nd::Tape tape;
  std::vector<nd::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.parameter(t));
  auto loss = build(tape, leaves);
  tape.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const nd::Tensor analytic = tape.grad(leaves[k]);
    std::vector<nd::Tensor> probe = inputs;
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k][i];
      probe[k][i] = x0 + h;
      const double fp = evaluate(build, probe);
      probe[k][i] = x0 - h;
      const double fm = evaluate(build, probe);
      probe[k][i] = x0;
      const double numeric = (fp - fm) / (2.0 * h);
      diff += (analytic[i] - numeric) * (analytic[i] - numeric);
      na += analytic[i] * analytic[i];
      nn += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-10});
    worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return worst;
}

inline nd::Tensor random_tensor(Rng& rng, nd::Shape shape, double scale = 1.0, double avoid_zero = 0.0) {
  nd::Tensor t(std::move(shape));
  for (auto& v : t.values()) {
    do {
      v = scale * rng.normal();
    } while (std::abs(v) < avoid_zero);
  }
  return t;
}

struct PrimitiveCase {
  const char* name;
  Builder build;
  std::vector<nd::Shape> shapes;
  double avoid_zero = 0.0;  // keeps inputs off kinks
};

/// One scalar loss per differentiable primitive.
inline std::vector<PrimitiveCase> primitive_cases() {
  using namespace nd;
  return {
      {"add", [](Tape&, const std::vector<Var>& v) { return sum(square(add(v[0], v[1]))); }, {{3, 2}, {3, 2}}},
      {"sub", [](Tape&, const std::vector<Var>& v) { return sum(square(sub(v[0], v[1]))); }, {{5}, {5}}},
      {"mul", [](Tape&, const std::vector<Var>& v) { return sum(mul(v[0], v[1])); }, {{4}, {4}}},
      {"minimum", [](Tape&, const std::vector<Var>& v) { return sum(square(minimum(v[0], v[1]))); }, {{6}, {6}}},
      {"scale", [](Tape&, const std::vector<Var>& v) { return sum(square(scale(v[0], -2.5))); }, {{3}}},
      {"add_scalar", [](Tape&, const std::vector<Var>& v) { return sum(square(add_scalar(v[0], 0.7))); }, {{3}}},
      {"tanh", [](Tape&, const std::vector<Var>& v) { return sum(tanh(v[0])); }, {{7}}},
      {"relu", [](Tape&, const std::vector<Var>& v) { return sum(square(relu(v[0]))); }, {{7}}, 1e-3},
      {"sigmoid", [](Tape&, const std::vector<Var>& v) { return sum(sigmoid(v[0])); }, {{7}}},
      {"exp", [](Tape&, const std::vector<Var>& v) { return sum(exp(v[0])); }, {{4}}},
      {"log", [](Tape&, const std::vector<Var>& v) { return sum(log(add_scalar(square(v[0]), 0.5))); }, {{4}}},
      {"clamp", [](Tape&, const std::vector<Var>& v) { return sum(square(clamp(v[0], -0.5, 0.8))); }, {{9}}},
      {"reshape", [](Tape&, const std::vector<Var>& v) { return sum(square(row_sum(reshape(v[0], {2, 3})))); }, {{6}}},
      {"mean", [](Tape&, const std::vector<Var>& v) { return mean(square(v[0])); }, {{5}}},
      {"matmul", [](Tape&, const std::vector<Var>& v) { return sum(square(matmul(v[0], v[1]))); }, {{3, 4}, {4, 2}}},
      {"add_bias", [](Tape&, const std::vector<Var>& v) { return sum(square(add_bias(v[0], v[1]))); }, {{3, 2}, {2}}},
      {"log_softmax",
       [groups = std::array<std::size_t, 2>{3, 2}](Tape& t, const std::vector<Var>& v) {
         return sum(mul(log_softmax(v[0], groups), t.constant(Tensor(Shape{2, 5}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}))));
       },
       {{2, 5}}},
      {"gather_sum",
       [](Tape&, const std::vector<Var>& v) {
         const std::array<std::size_t, 4> cols{0, 2, 1, 1};
         return sum(square(gather_sum(v[0], cols)));
       },
       {{2, 3}}},
      {"conv2d",
       [](Tape&, const std::vector<Var>& v) { return sum(square(conv2d(v[0], v[1], v[2], 2, 1))); },
       {{2, 2, 6, 6}, {3, 2, 4, 4}, {3}}},
      {"conv_transpose2d",
       [](Tape&, const std::vector<Var>& v) { return sum(square(conv_transpose2d(v[0], v[1], v[2], 2, 1))); },
       {{2, 3, 3, 3}, {3, 2, 4, 4}, {2}}},
      {"mse", [](Tape&, const std::vector<Var>& v) { return mse(v[0], v[1]); }, {{2, 3}, {2, 3}}},
      {"gaussian_kl_unit", [](Tape&, const std::vector<Var>& v) { return gaussian_kl_unit(v[0], v[1]); }, {{4}, {4}}},
  };
}

}  // namespace sre::testing
