// spkv/nn.hpp

// Copyright 2026 The spkv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// A small fixed set of differentiable operators with hand-written backward
// passes. Activations are Eigen matrices with one row per item (frame or
// utterance); trainable parameters live in Tensors so that the optimizer and
// the checkpoint container can treat them uniformly.

#ifndef SPKV_NN_HPP_
#define SPKV_NN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spkv/common.hpp"

namespace spkv::nn {

using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

/// Dense row-major array with an optional gradient buffer of the same size.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<Eigen::Index> shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(count(shape_), fill) {}

  static Tensor from_matrix(const Eigen::Ref<const Matrix> &m) {
    Tensor t({m.rows(), m.cols()});
    t.matrix() = m;
    return t;
  }
  static Tensor from_vector(const Eigen::Ref<const Vector> &v) {
    Tensor t({v.size()});
    t.vector() = v;
    return t;
  }
  static Tensor scalar(double v) {
    Tensor t({1});
    t.values_[0] = v;
    return t;
  }

  const std::vector<Eigen::Index> &shape() const { return shape_; }
  size_t size() const { return values_.size(); }
  Eigen::Index rows() const { return shape_.empty() ? 0 : shape_[0]; }
  Eigen::Index cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::vector<double> &values() { return values_; }
  const std::vector<double> &values() const { return values_; }
  double *data() { return values_.data(); }
  const double *data() const { return values_.data(); }
  double &value() { return values_.at(0); }
  double value() const { return values_.at(0); }

  bool has_grad() const { return grad_.size() == values_.size(); }
  std::vector<double> &grad() {
    if (!has_grad()) grad_.assign(values_.size(), 0.0);
    return grad_;
  }
  const std::vector<double> &grad() const { return grad_; }
  void zero_grad() { grad_.assign(values_.size(), 0.0); }

  MatrixMap matrix() { return MatrixMap(values_.data(), rows(), cols()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(values_.data(), rows(), cols()); }
  VectorMap vector() { return VectorMap(values_.data(), static_cast<Eigen::Index>(size())); }
  ConstVectorMap vector() const {
    return ConstVectorMap(values_.data(), static_cast<Eigen::Index>(size()));
  }
  MatrixMap grad_matrix() { return MatrixMap(grad().data(), rows(), cols()); }
  VectorMap grad_vector() { return VectorMap(grad().data(), static_cast<Eigen::Index>(size())); }

  bool operator==(const Tensor &o) const {
    return shape_ == o.shape_ && values_ == o.values_;
  }

  static size_t count(const std::vector<Eigen::Index> &shape) {
    size_t n = 1;
    for (auto d : shape) {
      if (d < 0) throw ShapeError("negative tensor dimension");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

 private:
  std::vector<Eigen::Index> shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
};

/// Non-owning ordered list of named parameters. The order is the iteration
/// order of the optimizer and of gradient reductions.
using ParamList = std::vector<std::pair<std::string, Tensor *>>;

inline void zero_grads(const ParamList &params) {
  for (auto &[name, t] : params) t->zero_grad();
}

inline size_t num_values(const ParamList &params) {
  size_t n = 0;
  for (auto &[name, t] : params) n += t->size();
  return n;
}

inline std::string shape_string(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// ---------------------------------------------------------------------------
// Affine: Y = X W^T + 1 b^T  (each row of X is one input x, y = W x + b)

inline Matrix affine_forward(const Eigen::Ref<const Matrix> &x, const Tensor &w, const Tensor &b) {
  if (x.cols() != w.cols() || static_cast<Eigen::Index>(b.size()) != w.rows())
    throw ShapeError("affine: input " + shape_string(x.rows(), x.cols()) + ", weight " +
                     shape_string(w.rows(), w.cols()) + ", bias " + std::to_string(b.size()));
  Matrix y = x * w.matrix().transpose();
  y.rowwise() += b.vector().transpose();
  return y;
}

/// Accumulates dW, db into the tensors' grads and returns dX.
inline Matrix affine_backward(const Eigen::Ref<const Matrix> &x, Tensor &w, Tensor &b,
                              const Eigen::Ref<const Matrix> &dy) {
  if (dy.rows() != x.rows() || dy.cols() != w.rows()) throw ShapeError("affine backward: bad dY shape");
  w.grad_matrix() += dy.transpose() * x;
  b.grad_vector() += dy.colwise().sum().transpose();
  return dy * w.matrix();
}

// ---------------------------------------------------------------------------
// Length normalization, row-wise: y = x / n with n = |x|, or |x| + eps when
// |x| < eps.

constexpr double kLengthNormEps = 1e-12;

struct LengthNormCache {
  Matrix y;
  Vector norm;       // the n used for each row
  Vector raw_norm;   // |x| for each row
};

inline double length_norm_divisor(double raw, double eps = kLengthNormEps) {
  return raw < eps ? raw + eps : raw;
}

inline Vector length_norm(const Eigen::Ref<const Vector> &x, double eps = kLengthNormEps) {
  return x / length_norm_divisor(x.norm(), eps);
}

inline LengthNormCache length_norm_forward(const Eigen::Ref<const Matrix> &x,
                                           double eps = kLengthNormEps) {
  LengthNormCache c;
  c.raw_norm = x.rowwise().norm();
  c.norm.resize(x.rows());
  c.y.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    c.norm[i] = length_norm_divisor(c.raw_norm[i], eps);
    c.y.row(i) = x.row(i) / c.norm[i];
  }
  return c;
}

/// dx = (dy - u (y . dy)) / n, where u = x/|x| (equal to y up to eps).
inline Matrix length_norm_backward(const LengthNormCache &c, const Eigen::Ref<const Matrix> &dy) {
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double n = c.norm[i];
    if (c.raw_norm[i] == 0.0) {
      dx.row(i) = dy.row(i) / n;
      continue;
    }
    const double ratio = n / c.raw_norm[i];  // u = y * ratio
    const double proj = c.y.row(i).dot(dy.row(i));
    dx.row(i) = (dy.row(i) - c.y.row(i) * (ratio * proj)) / n;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// TDNN layer: output frame t = ReLU(W concat(X[t + o_1], ..., X[t + o_c]) + b)
// over valid frames only. W is k_out x (c * k_in), blocks ordered as the
// offsets.

struct TdnnCache {
  Matrix spliced;  // T' x (c * k_in)
  Matrix pre;      // T' x k_out, pre-activation
};

inline Eigen::Index context_span(std::span<const int> offsets) {
  if (offsets.empty()) throw ArgumentError("tdnn: empty context");
  auto [lo, hi] = std::minmax_element(offsets.begin(), offsets.end());
  return *hi - *lo;
}

inline Matrix splice(const Eigen::Ref<const Matrix> &x, std::span<const int> offsets) {
  const Eigen::Index span = context_span(offsets);
  const int lo = *std::min_element(offsets.begin(), offsets.end());
  if (x.rows() <= span)
    throw LengthError("tdnn: " + std::to_string(x.rows()) + " frames, context span " +
                      std::to_string(span) + " needs at least " + std::to_string(span + 1));
  const Eigen::Index out_frames = x.rows() - span, k = x.cols();
  Matrix s(out_frames, k * static_cast<Eigen::Index>(offsets.size()));
  for (size_t j = 0; j < offsets.size(); ++j)
    s.middleCols(static_cast<Eigen::Index>(j) * k, k) = x.middleRows(offsets[j] - lo, out_frames);
  return s;
}

inline Matrix tdnn_forward(const Eigen::Ref<const Matrix> &x, std::span<const int> offsets,
                           const Tensor &w, const Tensor &b, TdnnCache *cache = nullptr) {
  if (w.cols() != x.cols() * static_cast<Eigen::Index>(offsets.size()))
    throw ShapeError("tdnn: weight " + shape_string(w.rows(), w.cols()) + " does not match " +
                     std::to_string(offsets.size()) + " x " + std::to_string(x.cols()) + " inputs");
  Matrix s = splice(x, offsets);
  Matrix pre = affine_forward(s, w, b);
  Matrix y = pre.cwiseMax(0.0);
  if (cache) {
    cache->spliced = std::move(s);
    cache->pre = std::move(pre);
  }
  return y;
}

/// Accumulates parameter grads; returns dX with the input's shape.
inline Matrix tdnn_backward(const TdnnCache &cache, std::span<const int> offsets, Eigen::Index in_frames,
                            Tensor &w, Tensor &b, const Eigen::Ref<const Matrix> &dy) {
  Matrix dpre = (cache.pre.array() > 0.0).select(dy, 0.0);
  Matrix ds = affine_backward(cache.spliced, w, b, dpre);
  const int lo = *std::min_element(offsets.begin(), offsets.end());
  const Eigen::Index out_frames = cache.pre.rows();
  const Eigen::Index k = ds.cols() / static_cast<Eigen::Index>(offsets.size());
  Matrix dx = Matrix::Zero(in_frames, k);
  for (size_t j = 0; j < offsets.size(); ++j)
    dx.middleRows(offsets[j] - lo, out_frames) += ds.middleCols(static_cast<Eigen::Index>(j) * k, k);
  return dx;
}

// ---------------------------------------------------------------------------
// Statistics pooling: [mean, stddev] or [mean, variance] over frames, with
// population (1/T) statistics; stddev = sqrt(var + eps_v).

enum class Pooling { kStddev, kVariance };

inline const char *pooling_name(Pooling p) { return p == Pooling::kStddev ? "stddev" : "variance"; }

inline Pooling parse_pooling(std::string_view s) {
  if (s == "stddev") return Pooling::kStddev;
  if (s == "variance" || s == "var") return Pooling::kVariance;
  throw ArgumentError("unknown pooling '" + std::string(s) + "' (stddev|variance)");
}

constexpr double kPoolingVarianceEps = 1e-10;

struct PoolCache {
  Vector mean;
  Vector var;
  Vector second;  // the pooled second statistic
};

inline Vector stats_pool_forward(const Eigen::Ref<const Matrix> &x, Pooling mode,
                                 PoolCache *cache = nullptr, double eps = kPoolingVarianceEps) {
  if (x.rows() < 2) throw LengthError("stats pooling needs at least 2 frames, got " + std::to_string(x.rows()));
  const double n = static_cast<double>(x.rows());
  Vector mean = x.colwise().mean().transpose();
  Vector var = (x.rowwise() - mean.transpose()).array().square().colwise().sum().transpose() / n;
  Vector second = mode == Pooling::kStddev ? Vector((var.array() + eps).sqrt()) : var;
  Vector out(2 * x.cols());
  out << mean, second;
  if (cache) *cache = {std::move(mean), std::move(var), std::move(second)};
  return out;
}

inline Matrix stats_pool_backward(const PoolCache &cache, Pooling mode,
                                  const Eigen::Ref<const Matrix> &x,
                                  const Eigen::Ref<const Vector> &dy) {
  const Eigen::Index k = x.cols();
  const double n = static_cast<double>(x.rows());
  Vector dvar = dy.tail(k);
  if (mode == Pooling::kStddev) dvar = dvar.cwiseQuotient(2.0 * cache.second);
  // d var_j / d x_tj = 2 (x_tj - mean_j) / T; the mean term of the variance
  // derivative sums to zero over frames.
  Matrix dx = (x.rowwise() - cache.mean.transpose()) * (2.0 / n) * dvar.asDiagonal();
  dx.rowwise() += (dy.head(k) / n).transpose();
  return dx;
}

// ---------------------------------------------------------------------------
// Quadratic scoring: s = e^T Q e + t^T Q t + 2 e^T P t + k.

struct QuadraticGrads {
  Vector d_enroll;
  Vector d_test;
  Matrix d_p;  // dense forms only
  Matrix d_q;
  Vector d_p_diag;  // diagonal forms only
  Vector d_q_diag;
  double d_k = 1.0;
};

inline double quadratic_score(const Eigen::Ref<const Vector> &e, const Eigen::Ref<const Vector> &t,
                              const Eigen::Ref<const Matrix> &p, const Eigen::Ref<const Matrix> &q,
                              double k) {
  const Eigen::Index d = e.size();
  if (t.size() != d || p.rows() != d || p.cols() != d || q.rows() != d || q.cols() != d)
    throw ShapeError("quadratic score: inconsistent dimensions");
  return e.dot(q * e) + t.dot(q * t) + 2.0 * e.dot(p * t) + k;
}

/// Gradients of the dense form; assumes P and Q symmetric.
inline QuadraticGrads quadratic_score_backward(const Eigen::Ref<const Vector> &e,
                                               const Eigen::Ref<const Vector> &t,
                                               const Eigen::Ref<const Matrix> &p,
                                               const Eigen::Ref<const Matrix> &q) {
  QuadraticGrads g;
  g.d_enroll = 2.0 * (q * e + p * t);
  g.d_test = 2.0 * (q * t + p.transpose() * e);
  g.d_q = e * e.transpose() + t * t.transpose();
  g.d_p = 2.0 * e * t.transpose();
  return g;
}

inline double quadratic_score_diag(const Eigen::Ref<const Vector> &e, const Eigen::Ref<const Vector> &t,
                                   const Eigen::Ref<const Vector> &p, const Eigen::Ref<const Vector> &q,
                                   double k) {
  const Eigen::Index d = e.size();
  if (t.size() != d || p.size() != d || q.size() != d)
    throw ShapeError("quadratic score: inconsistent dimensions");
  return (q.array() * (e.array().square() + t.array().square()) + 2.0 * p.array() * e.array() * t.array())
             .sum() + k;
}

inline QuadraticGrads quadratic_score_diag_backward(const Eigen::Ref<const Vector> &e,
                                                    const Eigen::Ref<const Vector> &t,
                                                    const Eigen::Ref<const Vector> &p,
                                                    const Eigen::Ref<const Vector> &q) {
  QuadraticGrads g;
  g.d_enroll = 2.0 * (q.array() * e.array() + p.array() * t.array()).matrix();
  g.d_test = 2.0 * (q.array() * t.array() + p.array() * e.array()).matrix();
  g.d_q_diag = (e.array().square() + t.array().square()).matrix();
  g.d_p_diag = 2.0 * (e.array() * t.array()).matrix();
  return g;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update of every parameter in `params` from its
/// grad buffer. Names in `frozen` are skipped (their moments still exist).
inline void adam_step(const ParamList &params, AdamState &state,
                      const std::vector<std::string> &frozen = {}) {
  if (state.m.empty()) {
    for (auto &[name, t] : params) {
      state.m.emplace_back(t->size(), 0.0);
      state.v.emplace_back(t->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw OptimizerError("optimizer state does not match parameter list");
  for (size_t i = 0; i < params.size(); ++i) {
    const auto &[name, t] = params[i];
    if (state.m[i].size() != t->size())
      throw OptimizerError("optimizer state shape mismatch for " + name);
    if (!t->has_grad()) continue;
    for (double g : t->grad())
      if (!std::isfinite(g)) throw OptimizerError("non-finite gradient in parameter " + name);
  }
  ++state.step;
  const AdamConfig &c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto &[name, t] = params[i];
    if (!t->has_grad()) continue;
    if (std::find(frozen.begin(), frozen.end(), name) != frozen.end()) continue;
    auto &m = state.m[i];
    auto &v = state.v[i];
    const auto &g = t->grad();
    auto &x = t->values();
    for (size_t j = 0; j < x.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      x[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

constexpr double kGradCheckFloor = 1e-4;

/// Largest per-coordinate relative error between `analytic` and the central
/// difference (f(x + h e_i) - f(x - h e_i)) / 2h. The error of coordinate i is
/// |a_i - n_i| / max(|a_i|, |n_i|, floor).
inline double grad_check(const std::function<double(std::span<const double>)> &f,
                         std::vector<double> x, std::span<const double> analytic,
                         double h = 1e-5, double floor = kGradCheckFloor) {
  if (analytic.size() != x.size()) throw ShapeError("grad_check: gradient length mismatch");
  double worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

/// Gradient check over every value of every parameter in `params`. `loss`
/// recomputes the scalar from the current parameter values; `backward` fills
/// the grads (after they are zeroed).
inline double grad_check_params(const ParamList &params, const std::function<double()> &loss,
                                const std::function<void()> &backward, double h = 1e-5,
                                double floor = kGradCheckFloor) {
  zero_grads(params);
  backward();
  std::vector<double> flat, analytic;
  for (auto &[name, t] : params) {
    flat.insert(flat.end(), t->values().begin(), t->values().end());
    analytic.insert(analytic.end(), t->grad().begin(), t->grad().end());
  }
  auto assign = [&](std::span<const double> x) {
    size_t pos = 0;
    for (auto &[name, t] : params)
      for (double &v : t->values()) v = x[pos++];
  };
  const std::vector<double> orig = flat;
  double err = grad_check(
      [&](std::span<const double> x) {
        assign(x);
        return loss();
      },
      flat, analytic, h, floor);
  assign(orig);
  return err;
}

// ---------------------------------------------------------------------------
// Initialization

inline void init_normal(Tensor &t, double stddev, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (double &v : t.values()) v = normal(rng);
}

}  // namespace spkv::nn

#endif  // SPKV_NN_HPP_
