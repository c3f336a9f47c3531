// Copyright 2026 The Footfall Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major tensors.
//
// A Var is a shared handle to a graph node (value + gradient). Ops record a
// backward closure on a Tape when recording is enabled and any input requires
// gradients; Tape::backward replays the closures in reverse order. Reductions
// accumulate in double regardless of the storage type T.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "footfall/error.hpp"
#include "footfall/fft.hpp"

namespace footfall::ad {

template <typename T>
using MatrixMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + "]";
}

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_))
      throw ContractViolation("tensor: data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_string(shape_));
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t rank() const noexcept { return shape_.size(); }

  // 2-D view: rank 0 -> 1x1, rank 1 -> 1xN, rank >= 2 -> shape[0] x rest.
  std::size_t rows() const noexcept { return shape_.size() >= 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept { return shape_.size() >= 2 ? data_.size() / shape_[0] : data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }
  T& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  T at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  MatrixMap<T> matrix() {
    return MatrixMap<T>(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
  }
  ConstMatrixMap<T> matrix() const {
    return ConstMatrixMap<T>(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first accumulation
  bool requires_grad = false;

  Tensor<T>& grad_ref() {
    if (grad.numel() != value.numel() || grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool has_grad() const { return grad.numel() == value.numel() && grad.shape() == value.shape(); }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return Var(std::move(n));
  }
  // A leaf that accumulates gradients; its gradient starts at zero.
  static Var parameter(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->grad_ref();
    return Var(std::move(n));
  }

  bool valid() const noexcept { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  // Zero-filled when no gradient reached this node.
  const Tensor<T>& grad() const { return node_->grad_ref(); }
  Tensor<T>& mutable_grad() { return node_->grad_ref(); }
  void zero_grad() { node_->grad_ref().fill(T(0)); }

  const std::shared_ptr<Node<T>>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return backward_.size(); }
  void clear() { backward_.clear(); }

  bool any_requires_grad(std::initializer_list<const Var<T>*> inputs) const {
    if (!recording_) return false;
    for (const Var<T>* v : inputs)
      if (v->requires_grad()) return true;
    return false;
  }

  // Wraps an op result; it requires grad when any input does and the tape records.
  Var<T> output(Tensor<T> value, bool requires_grad) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad && recording_;
    return Var<T>(std::move(n));
  }

  void push(std::function<void()> fn) {
    if (recording_) backward_.push_back(std::move(fn));
  }

  // Seeds d(loss)/d(loss) = 1 and replays every recorded closure once, newest
  // first. Gradients accumulate into the leaves' grad tensors.
  void backward(const Var<T>& loss) {
    if (loss.value().numel() != 1)
      throw ContractViolation("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
    if (!loss.requires_grad()) return;
    loss.node()->grad_ref()[0] = T(1);
    for (auto it = backward_.rbegin(); it != backward_.rend(); ++it) (*it)();
  }

 private:
  bool recording_;
  std::vector<std::function<void()>> backward_;
};

namespace detail {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                            shape_string(b.shape()));
}

// Largest representable value strictly below 1.
template <typename T>
constexpr T below_one() {
  return T(1) - std::numeric_limits<T>::epsilon() / T(2);
}

template <typename T>
Shape matrix_shape(std::size_t r, std::size_t c) {
  return Shape{r, c};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

// [m x k] * [k x n]
template <typename T>
Var<T> matmul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows())
    throw ContractViolation("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                            shape_string(b.shape()));
  Tensor<T> out(Shape{av.rows(), bv.cols()});
  out.matrix().noalias() = av.matrix() * bv.matrix();
  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&a, &b}));
  if (y.requires_grad())
    tape.push([an = a.node(), bn = b.node(), yn = y.node()] {
      if (!yn->has_grad()) return;
      const auto g = yn->grad.matrix();
      if (an->requires_grad) an->grad_ref().matrix().noalias() += g * bn->value.matrix().transpose();
      if (bn->requires_grad) bn->grad_ref().matrix().noalias() += an->value.matrix().transpose() * g;
    });
  return y;
}

// x [m x n] + bias broadcast over rows (bias holds n values).
template <typename T>
Var<T> add_bias(Tape<T>& tape, const Var<T>& x, const Var<T>& bias) {
  const auto& xv = x.value();
  if (bias.value().numel() != xv.cols())
    throw ContractViolation("add_bias: bias length " + std::to_string(bias.value().numel()) +
                            " does not match " + std::to_string(xv.cols()) + " columns");
  Tensor<T> out = xv;
  {
    auto m = out.matrix();
    const auto bv = ConstMatrixMap<T>(bias.value().data().data(), 1, static_cast<Eigen::Index>(xv.cols()));
    m.rowwise() += bv.row(0);
  }
  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&x, &bias}));
  if (y.requires_grad())
    tape.push([xn = x.node(), bn = bias.node(), yn = y.node()] {
      if (!yn->has_grad()) return;
      if (xn->requires_grad) xn->grad_ref().matrix() += yn->grad.matrix();
      if (bn->requires_grad) {
        const auto g = yn->grad.matrix();
        auto& gb = bn->grad_ref();
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
          double acc = 0.0;
          for (Eigen::Index r = 0; r < g.rows(); ++r) acc += g(r, c);
          gb[static_cast<std::size_t>(c)] += static_cast<T>(acc);
        }
      }
    });
  return y;
}

template <typename T>
Var<T> linear(Tape<T>& tape, const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  return add_bias(tape, matmul(tape, x, weight), bias);
}

// Columns [begin, end) of a 2-D tensor.
template <typename T>
Var<T> slice_cols(Tape<T>& tape, const Var<T>& a, std::size_t begin, std::size_t end) {
  const auto& av = a.value();
  if (begin > end || end > av.cols()) throw ContractViolation("slice_cols: range out of bounds");
  Tensor<T> out(Shape{av.rows(), end - begin});
  out.matrix() = av.matrix().middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&a}));
  if (y.requires_grad())
    tape.push([an = a.node(), yn = y.node(), begin, end] {
      if (!yn->has_grad()) return;
      an->grad_ref().matrix().middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) +=
          yn->grad.matrix();
    });
  return y;
}

template <typename T>
Var<T> concat_cols(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() != bv.rows()) throw ContractViolation("concat_cols: row counts differ");
  Tensor<T> out(Shape{av.rows(), av.cols() + bv.cols()});
  out.matrix().leftCols(static_cast<Eigen::Index>(av.cols())) = av.matrix();
  out.matrix().rightCols(static_cast<Eigen::Index>(bv.cols())) = bv.matrix();
  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&a, &b}));
  if (y.requires_grad())
    tape.push([an = a.node(), bn = b.node(), yn = y.node()] {
      if (!yn->has_grad()) return;
      const auto g = yn->grad.matrix();
      if (an->requires_grad) an->grad_ref().matrix() += g.leftCols(static_cast<Eigen::Index>(an->value.cols()));
      if (bn->requires_grad) bn->grad_ref().matrix() += g.rightCols(static_cast<Eigen::Index>(bn->value.cols()));
    });
  return y;
}

// Row i of the result is row ids[i] of table.
template <typename T>
Var<T> gather_rows(Tape<T>& tape, const Var<T>& table, std::vector<std::size_t> ids) {
  const auto& tv = table.value();
  const std::size_t d = tv.cols();
  Tensor<T> out(Shape{ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) throw ContractViolation("gather_rows: index out of range");
    std::copy_n(tv.data().begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&table}));
  if (y.requires_grad())
    tape.push([tn = table.node(), yn = y.node(), ids = std::move(ids), d] {
      if (!yn->has_grad()) return;
      auto& g = tn->grad_ref();
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t c = 0; c < d; ++c) g[ids[i] * d + c] += yn->grad[i * d + c];
    });
  return y;
}

// ---------------------------------------------------------------------------
// Elementwise

namespace detail {

// y = f(x) elementwise with dy/dx expressed through (x, y).
template <typename T, typename F, typename DF>
Var<T> unary(Tape<T>& tape, const Var<T>& x, F f, DF df) {
  Tensor<T> out(x.shape());
  const auto xs = x.value().data();
  auto ys = out.data();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&x}));
  if (y.requires_grad())
    tape.push([xn = x.node(), yn = y.node(), df] {
      if (!yn->has_grad()) return;
      auto& gx = xn->grad_ref();
      const auto& gy = yn->grad;
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i] * df(xn->value[i], yn->value[i]);
    });
  return y;
}

}  // namespace detail

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  out.matrix() += b.value().matrix();
  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&a, &b}));
  if (y.requires_grad())
    tape.push([an = a.node(), bn = b.node(), yn = y.node()] {
      if (!yn->has_grad()) return;
      if (an->requires_grad) an->grad_ref().matrix() += yn->grad.matrix();
      if (bn->requires_grad) bn->grad_ref().matrix() += yn->grad.matrix();
    });
  return y;
}

template <typename T>
Var<T> sub(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  out.matrix() -= b.value().matrix();
  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&a, &b}));
  if (y.requires_grad())
    tape.push([an = a.node(), bn = b.node(), yn = y.node()] {
      if (!yn->has_grad()) return;
      if (an->requires_grad) an->grad_ref().matrix() += yn->grad.matrix();
      if (bn->requires_grad) bn->grad_ref().matrix() -= yn->grad.matrix();
    });
  return y;
}

// Hadamard product.
template <typename T>
Var<T> mul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  out.matrix() = a.value().matrix().cwiseProduct(b.value().matrix());
  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&a, &b}));
  if (y.requires_grad())
    tape.push([an = a.node(), bn = b.node(), yn = y.node()] {
      if (!yn->has_grad()) return;
      if (an->requires_grad) an->grad_ref().matrix() += yn->grad.matrix().cwiseProduct(bn->value.matrix());
      if (bn->requires_grad) bn->grad_ref().matrix() += yn->grad.matrix().cwiseProduct(an->value.matrix());
    });
  return y;
}

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& x, T s) {
  return detail::unary(tape, x, [s](T v) { return s * v; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> square(Tape<T>& tape, const Var<T>& x) {
  return detail::unary(tape, x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

// Outputs are clamped into the open interval (0, 1).
template <typename T>
Var<T> sigmoid(Tape<T>& tape, const Var<T>& x) {
  return detail::unary(
      tape, x,
      [](T v) {
        const T s = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
        return std::clamp(s, std::numeric_limits<T>::min(), detail::below_one<T>());
      },
      [](T, T s) { return s * (T(1) - s); });
}

// Outputs are clamped into the open interval (-1, 1).
template <typename T>
Var<T> tanh(Tape<T>& tape, const Var<T>& x) {
  return detail::unary(
      tape, x, [](T v) { return std::clamp(std::tanh(v), -detail::below_one<T>(), detail::below_one<T>()); },
      [](T, T t) { return T(1) - t * t; });
}

template <typename T>
Var<T> softplus(Tape<T>& tape, const Var<T>& x) {
  return detail::unary(
      tape, x, [](T v) { return v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](T v, T) { return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v)); });
}

// ---------------------------------------------------------------------------
// Reductions (double accumulation)

template <typename T>
Var<T> sum(Tape<T>& tape, const Var<T>& x) {
  double acc = 0.0;
  for (T v : x.value().data()) acc += v;
  Var<T> y = tape.output(Tensor<T>::scalar(static_cast<T>(acc)), tape.any_requires_grad({&x}));
  if (y.requires_grad())
    tape.push([xn = x.node(), yn = y.node()] {
      if (!yn->has_grad()) return;
      const T g = yn->grad[0];
      for (T& v : xn->grad_ref().data()) v += g;
    });
  return y;
}

template <typename T>
Var<T> mean(Tape<T>& tape, const Var<T>& x) {
  const auto n = static_cast<double>(x.value().numel());
  return scale(tape, sum(tape, x), static_cast<T>(1.0 / n));
}

// mean((a - target)^2) over all elements; target is held constant.
template <typename T>
Var<T> mse(Tape<T>& tape, const Var<T>& a, const Tensor<T>& target) {
  if (a.shape() != target.shape())
    throw ContractViolation("mse: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(target.shape()));
  const auto n = a.value().numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a.value()[i]) - target[i];
    acc += d * d;
  }
  Var<T> y = tape.output(Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n))), tape.any_requires_grad({&a}));
  if (y.requires_grad())
    tape.push([an = a.node(), yn = y.node(), target, n] {
      if (!yn->has_grad()) return;
      const double g = static_cast<double>(yn->grad[0]) * 2.0 / static_cast<double>(n);
      auto& ga = an->grad_ref();
      for (std::size_t i = 0; i < n; ++i)
        ga[i] += static_cast<T>(g * (static_cast<double>(an->value[i]) - target[i]));
    });
  return y;
}

// ---------------------------------------------------------------------------
// Spectral

// Per-row |DFT| over the full N bins of each row (N a power of two).
// Bins with magnitude <= 1e-12 pass zero gradient.
template <typename T>
Var<T> fft_magnitude(Tape<T>& tape, const Var<T>& frames) {
  const auto& fv = frames.value();
  const std::size_t n = fv.cols(), rows = fv.rows();
  if (!fft::is_power_of_two(n)) throw ContractViolation("fft_magnitude: frame length must be a power of two");
  auto spectra = std::make_shared<std::vector<fft::Complex>>(rows * n);
  Tensor<T> out(frames.shape());
  std::vector<fft::Complex> buf(n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<double>(fv[r * n + i]);
    auto dst = std::span(*spectra).subspan(r * n, n);
    fft::forward(buf, dst);
    for (std::size_t k = 0; k < n; ++k) out[r * n + k] = static_cast<T>(std::abs(dst[k]));
  }
  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&frames}));
  if (y.requires_grad())
    tape.push([xn = frames.node(), yn = y.node(), spectra, n, rows] {
      if (!yn->has_grad()) return;
      constexpr double kEps = 1e-12;
      std::vector<fft::Complex> c(n), back(n);
      auto& gx = xn->grad_ref();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < n; ++k) {
          const fft::Complex X = (*spectra)[r * n + k];
          const double m = std::abs(X);
          c[k] = m > kEps ? static_cast<double>(yn->grad[r * n + k]) * X / m : fft::Complex(0.0);
        }
        // d|X_k|/dx_n = Re(X_k e^{+2 pi i k n / N}) / |X_k|
        fft::backward(c, back);
        for (std::size_t i = 0; i < n; ++i) gx[r * n + i] += static_cast<T>(back[i].real());
      }
    });
  return y;
}

// ---------------------------------------------------------------------------
// Recurrent layers
//
// GRU convention (row-vector form, gate blocks ordered [z | r | h] along the
// columns of W: in x 3H, U: H x 3H, b: 3H):
//   z  = sigmoid(x W_z + h U_z + b_z)
//   r  = sigmoid(x W_r + h U_r + b_r)
//   h~ = tanh(x W_h + (r * h) U_h + b_h)
//   h' = (1 - z) * h + z * h~

template <typename T>
struct GruParams {
  Var<T> w;  // in x 3H
  Var<T> u;  // H x 3H
  Var<T> b;  // 3H

  std::size_t input_size() const { return w.value().rows(); }
  std::size_t hidden_size() const { return u.value().rows(); }
};

template <typename T>
struct LinearParams {
  Var<T> w;  // in x out
  Var<T> b;  // out
};

// One GRU step composed from primitive ops; x is [B x in], h is [B x H].
template <typename T>
Var<T> gru_cell(Tape<T>& tape, const Var<T>& x, const Var<T>& h, const GruParams<T>& p) {
  const std::size_t hs = p.hidden_size();
  if (p.u.value().cols() != 3 * hs || p.w.value().cols() != 3 * hs || p.b.value().numel() != 3 * hs)
    throw ContractViolation("gru_cell: parameter shapes inconsistent with hidden size");
  if (h.value().cols() != hs || x.value().cols() != p.input_size() || x.value().rows() != h.value().rows())
    throw ContractViolation("gru_cell: input/state shapes do not match parameters");
  auto xw = linear(tape, x, p.w, p.b);
  auto u_zr = slice_cols(tape, p.u, 0, 2 * hs);
  auto u_h = slice_cols(tape, p.u, 2 * hs, 3 * hs);
  auto hu = matmul(tape, h, u_zr);
  auto z = sigmoid(tape, add(tape, slice_cols(tape, xw, 0, hs), slice_cols(tape, hu, 0, hs)));
  auto r = sigmoid(tape, add(tape, slice_cols(tape, xw, hs, 2 * hs), slice_cols(tape, hu, hs, 2 * hs)));
  auto cand = tanh(tape, add(tape, slice_cols(tape, xw, 2 * hs, 3 * hs), matmul(tape, mul(tape, r, h), u_h)));
  return add(tape, sub(tape, h, mul(tape, z, h)), mul(tape, z, cand));
}

// Runs a GRU over a time-major sequence from a zero initial state.
// x is [(steps * batch) x in] with row t * batch + b holding step t of item b;
// the result has the same row layout with H columns. Backward is hand-written
// BPTT; recurrent weight gradients are accumulated with one GEMM per gate group.
template <typename T>
Var<T> gru_sequence(Tape<T>& tape, const Var<T>& x, const GruParams<T>& p, std::size_t steps, std::size_t batch) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const std::size_t hs = p.hidden_size();
  const auto H = static_cast<Eigen::Index>(hs);
  const auto B = static_cast<Eigen::Index>(batch);
  if (x.value().rows() != steps * batch || x.value().cols() != p.input_size())
    throw ContractViolation("gru_sequence: input is " + shape_string(x.shape()) + ", expected [" +
                            std::to_string(steps * batch) + ", " + std::to_string(p.input_size()) + "]");
  if (p.u.value().cols() != 3 * hs || p.w.value().cols() != 3 * hs || p.b.value().numel() != 3 * hs)
    throw ContractViolation("gru_sequence: parameter shapes inconsistent with hidden size");

  const auto rows = static_cast<Eigen::Index>(steps * batch);
  const auto U = p.u.value().matrix();
  const auto bias = ConstMatrixMap<T>(p.b.value().data().data(), 1, 3 * H);

  // Pre-activations from the input for every step at once.
  auto xp = std::make_shared<Mat>(rows, 3 * H);
  xp->noalias() = x.value().matrix() * p.w.value().matrix();
  xp->rowwise() += bias.row(0);

  Tensor<T> out(Shape{steps * batch, hs});
  auto gates = std::make_shared<Mat>(rows, 3 * H);  // z, r, h~ per step
  auto reset_state = std::make_shared<Mat>(rows, H);  // r * h_prev
  auto hout = out.matrix();
  Mat h_prev = Mat::Zero(B, H);
  Mat zr(B, 2 * H), cand(B, H);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto r0 = static_cast<Eigen::Index>(t * batch);
    zr.noalias() = xp->block(r0, 0, B, 2 * H);
    zr.noalias() += h_prev * U.leftCols(2 * H);
    for (Eigen::Index i = 0; i < zr.size(); ++i) {
      const T v = zr.data()[i];
      const T s = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
      zr.data()[i] = std::clamp(s, std::numeric_limits<T>::min(), detail::below_one<T>());
    }
    auto rh = reset_state->block(r0, 0, B, H);
    rh = zr.rightCols(H).cwiseProduct(h_prev);
    cand.noalias() = xp->block(r0, 2 * H, B, H);
    cand.noalias() += rh * U.rightCols(H);
    for (Eigen::Index i = 0; i < cand.size(); ++i)
      cand.data()[i] = std::clamp(std::tanh(cand.data()[i]), -detail::below_one<T>(), detail::below_one<T>());
    gates->block(r0, 0, B, 2 * H) = zr;
    gates->block(r0, 2 * H, B, H) = cand;
    auto z = zr.leftCols(H);
    hout.block(r0, 0, B, H) = h_prev + z.cwiseProduct(cand - h_prev);
    h_prev = hout.block(r0, 0, B, H);
  }

  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&x, &p.w, &p.u, &p.b}));
  if (y.requires_grad())
    tape.push([xn = x.node(), wn = p.w.node(), un = p.u.node(), bn = p.b.node(), yn = y.node(), gates,
               reset_state, steps, B, H, rows] {
      if (!yn->has_grad()) return;
      const auto U = un->value.matrix();
      const auto hall = yn->value.matrix();
      const auto g_out = yn->grad.matrix();
      Mat d_pre(rows, 3 * H);  // gradients of the three pre-activations
      Mat dh = Mat::Zero(B, H), dh_prev(B, H), d_rh(B, H);
      Mat h_prev(B, H);
      for (std::size_t step = steps; step-- > 0;) {
        const auto r0 = static_cast<Eigen::Index>(step * static_cast<std::size_t>(B));
        if (step == 0)
          h_prev.setZero();
        else
          h_prev = hall.block(r0 - B, 0, B, H);
        dh += g_out.block(r0, 0, B, H);
        const auto z = gates->block(r0, 0, B, H);
        const auto r = gates->block(r0, H, B, H);
        const auto cand = gates->block(r0, 2 * H, B, H);
        auto da_z = d_pre.block(r0, 0, B, H);
        auto da_r = d_pre.block(r0, H, B, H);
        auto da_h = d_pre.block(r0, 2 * H, B, H);
        da_h = dh.cwiseProduct(z).cwiseProduct((Mat::Ones(B, H) - cand.cwiseProduct(cand)));
        da_z = dh.cwiseProduct(cand - h_prev).cwiseProduct(z.cwiseProduct(Mat::Ones(B, H) - z));
        dh_prev = dh.cwiseProduct(Mat::Ones(B, H) - z);
        d_rh.noalias() = da_h * U.rightCols(H).transpose();
        da_r = d_rh.cwiseProduct(h_prev).cwiseProduct(r.cwiseProduct(Mat::Ones(B, H) - r));
        dh_prev += d_rh.cwiseProduct(r);
        dh_prev.noalias() += d_pre.block(r0, 0, B, 2 * H) * U.leftCols(2 * H).transpose();
        dh = dh_prev;
      }
      if (un->requires_grad) {
        // h_prev for every row: zero for step 0, previous step's output otherwise.
        auto& gu = un->grad_ref();
        auto gum = gu.matrix();
        if (rows > B)
          gum.leftCols(2 * H).noalias() += hall.topRows(rows - B).transpose() * d_pre.block(B, 0, rows - B, 2 * H);
        gum.rightCols(H).noalias() += reset_state->transpose() * d_pre.rightCols(H);
      }
      if (wn->requires_grad) wn->grad_ref().matrix().noalias() += xn->value.matrix().transpose() * d_pre;
      if (bn->requires_grad) {
        auto& gb = bn->grad_ref();
        for (Eigen::Index c = 0; c < 3 * H; ++c) {
          double acc = 0.0;
          for (Eigen::Index r = 0; r < rows; ++r) acc += d_pre(r, c);
          gb[static_cast<std::size_t>(c)] += static_cast<T>(acc);
        }
      }
      if (xn->requires_grad) xn->grad_ref().matrix().noalias() += d_pre * wn->value.matrix().transpose();
    });
  return y;
}

}  // namespace footfall::ad
