#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sre/nd/tape.hpp"
#include "sre/nd/tensor.hpp"

// Differentiable primitives over a Tape, plus plain-value versions of the
// distribution functions used outside of training.
namespace sre::nd {

// Elementwise, identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var minimum(Var a, Var b);

Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var neg(Var a);

Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
// Gradient is zero where the input lies outside [lo, hi].
Var clamp(Var a, double lo, double hi);

Var reshape(Var a, Shape shape);

// Reductions to a rank-0 scalar.
Var sum(Var a);
Var mean(Var a);

// [m, n] -> [m]
Var row_sum(Var a);

// [m, k] x [k, n] -> [m, n]
Var matmul(Var a, Var b);
// [m, n] + [n] broadcast over rows.
Var add_bias(Var x, Var bias);
// x W + b, the dense layer.
Var linear(Var x, Var weight, Var bias);

/// Row-wise log-softmax over consecutive column groups of the given sizes,
/// which must sum to the column count.
Var log_softmax(Var logits, std::span<const std::size_t> groups);

/// For each row i, sums x[i, columns[i * k + j]] over j < k, with
/// k = columns.size() / rows.
Var gather_sum(Var x, std::span<const std::size_t> columns);

/// [B, C, H, W] * [O, C, K, K] (+ [O]) -> [B, O, Ho, Wo].
Var conv2d(Var input, Var weight, Var bias, std::size_t stride, std::size_t padding);
/// Adjoint of conv2d: [B, C, H, W] with weight [C, O, K, K] -> [B, O, Ho, Wo],
/// Ho = (H - 1) * stride - 2 * padding + K.
Var conv_transpose2d(Var input, Var weight, Var bias, std::size_t stride, std::size_t padding);

// Composite losses.
Var mse(Var a, Var b);
/// Sum over all elements of 0.5 * (mu^2 + exp(logvar) - 1 - logvar).
Var gaussian_kl_unit(Var mu, Var logvar);

// Plain-value helpers.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);
/// KL(P || Q) between the categoricals given by two logit vectors (nats).
double categorical_kl(std::span<const double> p_logits, std::span<const double> q_logits);
double gaussian_kl_unit(std::span<const double> mu, std::span<const double> logvar);
double mse(const Tensor& a, const Tensor& b);

// Tape-free forward evaluation for inference paths.
namespace value {
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding);
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
                        std::size_t padding);
void relu_inplace(Tensor& t);
void tanh_inplace(Tensor& t);
void sigmoid_inplace(Tensor& t);
}  // namespace value

}  // namespace sre::nd
