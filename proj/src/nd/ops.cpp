#include "sre/nd/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sre::nd {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw std::invalid_argument("Var is not bound to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("operands live on different tapes");
  return tape_of(a);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + shape_string(t.shape()));
}

// y = f(x); dx += g * df(x, y)
template <class F, class DF>
Var unary(Var a, F f, DF df) {
  Tape& tape = tape_of(a);
  const Tensor& x = tape.value(a);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id;
  return tape.record(std::move(y), {ia}, [ia, df](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.grad_slot(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(x[i], y[i]);
  });
}

// im2col for one image [C, H, W] -> [C*K*K, Ho*Wo]
void im2col(const double* img, std::size_t C, std::size_t H, std::size_t W, std::size_t K,
            std::size_t stride, std::size_t pad, std::size_t Ho, std::size_t Wo, double* cols) {
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ki = 0; ki < K; ++ki)
      for (std::size_t kj = 0; kj < K; ++kj) {
        double* row = cols + ((c * K + ki) * K + kj) * Ho * Wo;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ki) - static_cast<long>(pad);
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const long ix = static_cast<long>(ox * stride + kj) - static_cast<long>(pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(H) && ix < static_cast<long>(W);
            row[oy * Wo + ox] = inside ? img[(c * H + iy) * W + ix] : 0.0;
          }
        }
      }
}

// Scatter-add adjoint of im2col.
void col2im(const double* cols, std::size_t C, std::size_t H, std::size_t W, std::size_t K,
            std::size_t stride, std::size_t pad, std::size_t Ho, std::size_t Wo, double* img) {
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ki = 0; ki < K; ++ki)
      for (std::size_t kj = 0; kj < K; ++kj) {
        const double* row = cols + ((c * K + ki) * K + kj) * Ho * Wo;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ki) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            const long ix = static_cast<long>(ox * stride + kj) - static_cast<long>(pad);
            if (ix < 0 || ix >= static_cast<long>(W)) continue;
            img[(c * H + iy) * W + ix] += row[oy * Wo + ox];
          }
        }
      }
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  if (in + 2 * pad < k) throw std::invalid_argument("conv2d: kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = tape.value(a);
  const Tensor& y = tape.value(b);
  require_same_shape(x, y, "add");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  const auto ia = a.id, ib = b.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_slot(self);
    for (auto in : {ia, ib}) {
      if (!t.requires_grad(in)) continue;
      Tensor& gx = t.grad_slot(in);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = tape.value(a);
  const Tensor& y = tape.value(b);
  require_same_shape(x, y, "sub");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  const auto ia = a.id, ib = b.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_slot(self);
    if (t.requires_grad(ia)) {
      Tensor& gx = t.grad_slot(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gy = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gy[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = tape.value(a);
  const Tensor& y = tape.value(b);
  require_same_shape(x, y, "mul");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  const auto ia = a.id, ib = b.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_slot(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor& gx = t.grad_slot(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gy = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * x[i];
    }
  });
}

Var minimum(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = tape.value(a);
  const Tensor& y = tape.value(b);
  require_same_shape(x, y, "minimum");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(x[i], y[i]);
  const auto ia = a.id, ib = b.id;
  // Ties route the gradient to the first operand.
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_slot(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor& gx = t.grad_slot(ia);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] <= y[i]) gx[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gy = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (y[i] < x[i]) gy[i] += g[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var reshape(Var a, Shape shape) {
  Tape& tape = tape_of(a);
  Tensor out = tape.value(a).reshaped(std::move(shape));
  const auto ia = a.id;
  return tape.record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.grad_slot(self);
    Tensor& gx = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = tape.value(a);
  const double total = std::accumulate(x.values().begin(), x.values().end(), 0.0);
  const auto ia = a.id;
  return tape.record(Tensor::scalar(total), {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const double g = t.grad_slot(self)[0];
    Tensor& gx = t.grad_slot(ia);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var row_sum(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = tape.value(a);
  require_rank(x, 2, "row_sum");
  const std::size_t m = x.dim(0), n = x.dim(1);
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += x[i * n + j];
  const auto ia = a.id;
  return tape.record(std::move(out), {ia}, [ia, m, n](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.grad_slot(self);
    Tensor& gx = t.grad_slot(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[i];
  });
}

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = tape.value(a);
  const Tensor& y = tape.value(b);
  require_rank(x, 2, "matmul");
  require_rank(y, 2, "matmul");
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  if (y.dim(0) != k)
    throw std::invalid_argument("matmul: inner extents differ " + shape_string(x.shape()) + " x " +
                                shape_string(y.shape()));
  Tensor out(Shape{m, n});
  MapMat(out.data(), m, n).noalias() = CMapMat(x.data(), m, k) * CMapMat(y.data(), k, n);
  const auto ia = a.id, ib = b.id;
  return tape.record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
    CMapMat g(t.grad_slot(self).data(), m, n);
    if (t.requires_grad(ia)) {
      MapMat(t.grad_slot(ia).data(), m, k).noalias() += g * CMapMat(t.value(ib).data(), k, n).transpose();
    }
    if (t.requires_grad(ib)) {
      MapMat(t.grad_slot(ib).data(), k, n).noalias() += CMapMat(t.value(ia).data(), m, k).transpose() * g;
    }
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = tape_of(x, bias);
  const Tensor& v = tape.value(x);
  const Tensor& b = tape.value(bias);
  require_rank(v, 2, "add_bias");
  const std::size_t m = v.dim(0), n = v.dim(1);
  if (b.size() != n) throw std::invalid_argument("add_bias: bias length does not match columns");
  Tensor out(v.shape());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = v[i * n + j] + b[j];
  const auto ix = x.id, ib = bias.id;
  return tape.record(std::move(out), {ix, ib}, [ix, ib, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_slot(self);
    if (t.requires_grad(ix)) {
      Tensor& gx = t.grad_slot(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_slot(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}

Var linear(Var x, Var weight, Var bias) { return add_bias(matmul(x, weight), bias); }

namespace value {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (w.dim(0) != k) throw std::invalid_argument("linear: inner extents differ");
  if (b.size() != n) throw std::invalid_argument("linear: bias length mismatch");
  Tensor out(Shape{m, n});
  MapMat o(out.data(), m, n);
  o.noalias() = CMapMat(x.data(), m, k) * CMapMat(w.data(), k, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) o(i, j) += b[j];
  return out;
}

void relu_inplace(Tensor& t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
}

void tanh_inplace(Tensor& t) {
  for (double& v : t.values()) v = std::tanh(v);
}

void sigmoid_inplace(Tensor& t) {
  for (double& v : t.values()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace value

Var log_softmax(Var logits, std::span<const std::size_t> groups) {
  Tape& tape = tape_of(logits);
  const Tensor& x = tape.value(logits);
  require_rank(x, 2, "log_softmax");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<std::size_t> sizes(groups.begin(), groups.end());
  if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != n)
    throw std::invalid_argument("log_softmax: group sizes do not cover the columns");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t off = i * n;
    for (auto gsize : sizes) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < gsize; ++j) mx = std::max(mx, x[off + j]);
      double z = 0.0;
      for (std::size_t j = 0; j < gsize; ++j) z += std::exp(x[off + j] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t j = 0; j < gsize; ++j) out[off + j] = x[off + j] - lse;
      off += gsize;
    }
  }
  const auto ia = logits.id;
  return tape.record(std::move(out), {ia}, [ia, m, n, sizes](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.grad_slot(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_slot(ia);
    // d/dx_k = g_k - softmax_k * sum_j g_j, within each group
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t off = i * n;
      for (auto gsize : sizes) {
        double gs = 0.0;
        for (std::size_t j = 0; j < gsize; ++j) gs += g[off + j];
        for (std::size_t j = 0; j < gsize; ++j) gx[off + j] += g[off + j] - std::exp(y[off + j]) * gs;
        off += gsize;
      }
    }
  });
}

Var gather_sum(Var x, std::span<const std::size_t> columns) {
  Tape& tape = tape_of(x);
  const Tensor& v = tape.value(x);
  require_rank(v, 2, "gather_sum");
  const std::size_t m = v.dim(0), n = v.dim(1);
  if (columns.size() % m != 0) throw std::invalid_argument("gather_sum: index count not a multiple of rows");
  const std::size_t k = columns.size() / m;
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  for (auto c : cols)
    if (c >= n) throw std::invalid_argument("gather_sum: column index out of range");
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i] += v[i * n + cols[i * k + j]];
  const auto ia = x.id;
  return tape.record(std::move(out), {ia}, [ia, m, n, k, cols](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.grad_slot(self);
    Tensor& gx = t.grad_slot(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) gx[i * n + cols[i * k + j]] += g[i];
  });
}

namespace value {

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t padding) {
  require_rank(x, 4, "conv2d");
  require_rank(w, 4, "conv2d");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), K = w.dim(2);
  if (w.dim(1) != C || w.dim(3) != K) throw std::invalid_argument("conv2d: weight shape mismatch");
  if (b.size() != O) throw std::invalid_argument("conv2d: bias length mismatch");
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  const std::size_t Ho = conv_out(H, K, stride, padding), Wo = conv_out(W, K, stride, padding);
  const std::size_t CKK = C * K * K, P = Ho * Wo;

  Tensor out(Shape{B, O, Ho, Wo});
  std::vector<double> cols(CKK * P);
  CMapMat wm(w.data(), O, CKK);
  for (std::size_t bi = 0; bi < B; ++bi) {
    im2col(x.data() + bi * C * H * W, C, H, W, K, stride, padding, Ho, Wo, cols.data());
    MapMat o(out.data() + bi * O * P, O, P);
    o.noalias() = wm * CMapMat(cols.data(), CKK, P);
    for (std::size_t oc = 0; oc < O; ++oc) o.row(oc).array() += b[oc];
  }
  return out;
}

}  // namespace value

Var conv2d(Var input, Var weight, Var bias, std::size_t stride, std::size_t padding) {
  Tape& tape = tape_of(input, weight);
  tape_of(input, bias);
  Tensor out = value::conv2d(tape.value(input), tape.value(weight), tape.value(bias), stride, padding);
  const Tensor& x = tape.value(input);
  const Tensor& w = tape.value(weight);
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), K = w.dim(2);
  const std::size_t Ho = out.dim(2), Wo = out.dim(3);
  const std::size_t CKK = C * K * K, P = Ho * Wo;
  const auto ix = input.id, iw = weight.id, ib = bias.id;
  return tape.record(
      std::move(out), {ix, iw, ib},
      [=](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_slot(self);
        const Tensor& x = t.value(ix);
        const Tensor& w = t.value(iw);
        std::vector<double> cols(CKK * P), dcols(CKK * P);
        const bool need_x = t.requires_grad(ix), need_w = t.requires_grad(iw), need_b = t.requires_grad(ib);
        for (std::size_t bi = 0; bi < B; ++bi) {
          CMapMat gm(g.data() + bi * O * P, O, P);
          if (need_b) {
            Tensor& gb = t.grad_slot(ib);
            for (std::size_t oc = 0; oc < O; ++oc) gb[oc] += gm.row(oc).sum();
          }
          if (need_w) {
            im2col(x.data() + bi * C * H * W, C, H, W, K, stride, padding, Ho, Wo, cols.data());
            MapMat(t.grad_slot(iw).data(), O, CKK).noalias() += gm * CMapMat(cols.data(), CKK, P).transpose();
          }
          if (need_x) {
            MapMat(dcols.data(), CKK, P).noalias() = CMapMat(w.data(), O, CKK).transpose() * gm;
            col2im(dcols.data(), C, H, W, K, stride, padding, Ho, Wo, t.grad_slot(ix).data() + bi * C * H * W);
          }
        }
      });
}

namespace value {

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                        std::size_t padding) {
  require_rank(x, 4, "conv_transpose2d");
  require_rank(w, 4, "conv_transpose2d");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(1), K = w.dim(2);
  if (w.dim(0) != C || w.dim(3) != K) throw std::invalid_argument("conv_transpose2d: weight shape mismatch");
  if (b.size() != O) throw std::invalid_argument("conv_transpose2d: bias length mismatch");
  if (stride == 0) throw std::invalid_argument("conv_transpose2d: stride must be positive");
  if ((H - 1) * stride + K < 2 * padding + 1) throw std::invalid_argument("conv_transpose2d: padding too large");
  const std::size_t Ho = (H - 1) * stride + K - 2 * padding, Wo = (W - 1) * stride + K - 2 * padding;
  const std::size_t OKK = O * K * K, P = H * W;
  // The output plane convolved with (K, stride, padding) must give back H x W.
  if (conv_out(Ho, K, stride, padding) != H || conv_out(Wo, K, stride, padding) != W)
    throw std::invalid_argument("conv_transpose2d: geometry is not invertible");

  Tensor out(Shape{B, O, Ho, Wo});
  std::vector<double> cols(OKK * P);
  CMapMat wm(w.data(), C, OKK);
  for (std::size_t bi = 0; bi < B; ++bi) {
    MapMat(cols.data(), OKK, P).noalias() = wm.transpose() * CMapMat(x.data() + bi * C * P, C, P);
    double* o = out.data() + bi * O * Ho * Wo;
    col2im(cols.data(), O, Ho, Wo, K, stride, padding, H, W, o);
    for (std::size_t oc = 0; oc < O; ++oc)
      for (std::size_t p = 0; p < Ho * Wo; ++p) o[oc * Ho * Wo + p] += b[oc];
  }
  return out;
}

}  // namespace value

Var conv_transpose2d(Var input, Var weight, Var bias, std::size_t stride, std::size_t padding) {
  Tape& tape = tape_of(input, weight);
  tape_of(input, bias);
  Tensor out = value::conv_transpose2d(tape.value(input), tape.value(weight), tape.value(bias), stride, padding);
  const Tensor& x = tape.value(input);
  const Tensor& w = tape.value(weight);
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(1), K = w.dim(2);
  const std::size_t Ho = out.dim(2), Wo = out.dim(3);
  const std::size_t OKK = O * K * K, P = H * W;
  const auto ix = input.id, iw = weight.id, ib = bias.id;
  return tape.record(
      std::move(out), {ix, iw, ib},
      [=](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_slot(self);
        const Tensor& x = t.value(ix);
        const Tensor& w = t.value(iw);
        std::vector<double> gcols(OKK * P);
        const bool need_x = t.requires_grad(ix), need_w = t.requires_grad(iw), need_b = t.requires_grad(ib);
        for (std::size_t bi = 0; bi < B; ++bi) {
          const double* gi = g.data() + bi * O * Ho * Wo;
          if (need_b) {
            Tensor& gb = t.grad_slot(ib);
            for (std::size_t oc = 0; oc < O; ++oc)
              for (std::size_t p = 0; p < Ho * Wo; ++p) gb[oc] += gi[oc * Ho * Wo + p];
          }
          if (!need_x && !need_w) continue;
          im2col(gi, O, Ho, Wo, K, stride, padding, H, W, gcols.data());
          CMapMat gc(gcols.data(), OKK, P);
          if (need_x) {
            MapMat(t.grad_slot(ix).data() + bi * C * P, C, P).noalias() += CMapMat(w.data(), C, OKK) * gc;
          }
          if (need_w) {
            MapMat(t.grad_slot(iw).data(), C, OKK).noalias() += CMapMat(x.data() + bi * C * P, C, P) * gc.transpose();
          }
        }
      });
}

Var mse(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mse");
  return mean(square(sub(a, b)));
}

Var gaussian_kl_unit(Var mu, Var logvar) {
  require_same_shape(mu.value(), logvar.value(), "gaussian_kl_unit");
  // 0.5 * (mu^2 + exp(lv) - 1 - lv)
  Var inner = sub(add(square(mu), exp(logvar)), add_scalar(logvar, 1.0));
  return scale(sum(inner), 0.5);
}

std::vector<double> log_softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

double categorical_kl(std::span<const double> p_logits, std::span<const double> q_logits) {
  if (p_logits.size() != q_logits.size()) throw std::invalid_argument("categorical_kl: length mismatch");
  const auto lp = log_softmax(p_logits);
  const auto lq = log_softmax(q_logits);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  return kl;
}

double gaussian_kl_unit(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) throw std::invalid_argument("gaussian_kl_unit: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    kl += 0.5 * (mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i]);
  return kl;
}

double mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace sre::nd
