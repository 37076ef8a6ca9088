// tests/nn_test.cpp

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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spkv/nn.hpp"

namespace spkv::nn {
namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64 &rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Input gradient check: treats x as the parameter vector.
double input_check(const Matrix &x0, const std::function<double(const Matrix &)> &f, const Matrix &analytic) {
  std::vector<double> flat(x0.data(), x0.data() + x0.size());
  std::vector<double> a(analytic.data(), analytic.data() + analytic.size());
  return grad_check(
      [&](std::span<const double> v) {
        Matrix x = Eigen::Map<const Matrix>(v.data(), x0.rows(), x0.cols());
        return f(x);
      },
      flat, a);
}

TEST(Affine, ForwardMatchesLoop) {
  std::mt19937_64 rng(1);
  Tensor w = Tensor::from_matrix(random_matrix(3, 4, rng));
  Tensor b = Tensor::from_vector(random_matrix(3, 1, rng));
  Matrix x = random_matrix(2, 4, rng);
  Matrix y = affine_forward(x, w, b);
  for (int i = 0; i < 2; ++i)
    for (int o = 0; o < 3; ++o) {
      double s = b.values()[o];
      for (int j = 0; j < 4; ++j) s += w.matrix()(o, j) * x(i, j);
      EXPECT_NEAR(y(i, o), s, 1e-12);
    }
  Matrix bad = random_matrix(2, 5, rng);
  EXPECT_THROW(affine_forward(bad, w, b), ShapeError);
}

TEST(Affine, GradientsPassFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    Tensor w = Tensor::from_matrix(random_matrix(3, 4, rng));
    Tensor b = Tensor::from_vector(random_matrix(3, 1, rng));
    const Matrix x = random_matrix(5, 4, rng);
    const Matrix r = random_matrix(5, 3, rng);  // loss = sum(r .* y)
    ParamList params{{"w", &w}, {"b", &b}};
    auto loss = [&] { return (affine_forward(x, w, b).array() * r.array()).sum(); };
    Matrix dx;
    double err = grad_check_params(params, loss, [&] { dx = affine_backward(x, w, b, r); });
    EXPECT_LT(err, 1e-5) << "seed " << seed;
    auto fx = [&](const Matrix &xx) { return (affine_forward(xx, w, b).array() * r.array()).sum(); };
    EXPECT_LT(input_check(x, fx, dx), 1e-5) << "seed " << seed;
  }
}

TEST(LengthNorm, UnitNormAndGradient) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 100);
    const Matrix x = random_matrix(4, 6, rng);
    const Matrix r = random_matrix(4, 6, rng);
    auto c = length_norm_forward(x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) EXPECT_NEAR(c.y.row(i).norm(), 1.0, 1e-12);
    Matrix dx = length_norm_backward(c, r);
    auto f = [&](const Matrix &xx) { return (length_norm_forward(xx).y.array() * r.array()).sum(); };
    EXPECT_LT(input_check(x, f, dx), 1e-5) << "seed " << seed;
  }
}

TEST(LengthNorm, ZeroVectorIsFinite) {
  Matrix x = Matrix::Zero(1, 3);
  auto c = length_norm_forward(x);
  EXPECT_TRUE(c.y.allFinite());
  EXPECT_EQ(c.y.norm(), 0.0);
  Matrix dx = length_norm_backward(c, Matrix::Ones(1, 3));
  EXPECT_TRUE(dx.allFinite());
  Vector tiny = Vector::Constant(3, 1e-14);
  EXPECT_TRUE(length_norm(tiny).allFinite());
}

TEST(Splice, ValidFramesOnly) {
  Matrix x(6, 1);
  x << 0, 1, 2, 3, 4, 5;
  std::vector<int> offsets{-2, 0, 2};
  Matrix s = splice(x, offsets);
  ASSERT_EQ(s.rows(), 2);
  EXPECT_EQ(s.row(0), (Eigen::RowVector3d(0, 2, 4)));
  EXPECT_EQ(s.row(1), (Eigen::RowVector3d(1, 3, 5)));
  Matrix short_x = Matrix::Zero(4, 1);
  EXPECT_THROW(splice(short_x, offsets), LengthError);
}

TEST(Tdnn, ForwardMatchesHandComputation) {
  // One input channel, one output, context {-1, 1}: y_t = relu(w0 x_{t-1} + w1 x_{t+1} + b)
  Matrix x(4, 1);
  x << 1, -2, 3, 0.5;
  Tensor w({1, 2});
  w.values() = {2.0, -1.0};
  Tensor b = Tensor::from_vector(Vector::Constant(1, 0.5));
  std::vector<int> offsets{-1, 1};
  Matrix y = tdnn_forward(x, offsets, w, b);
  ASSERT_EQ(y.rows(), 2);
  EXPECT_DOUBLE_EQ(y(0, 0), std::max(0.0, 2.0 * 1 - 1.0 * 3 + 0.5));
  EXPECT_DOUBLE_EQ(y(1, 0), std::max(0.0, 2.0 * -2 - 1.0 * 0.5 + 0.5));
}

// Pre-activations of a seed are kept away from zero so that the central
// difference never straddles the ReLU kink.
bool clear_of_kinks(const Matrix &x, std::span<const int> offs, const Tensor &w, const Tensor &b, double margin) {
  TdnnCache c;
  tdnn_forward(x, offs, w, b, &c);
  return c.pre.cwiseAbs().minCoeff() > margin;
}

TEST(Tdnn, GradientsPassFiniteDifferences) {
  std::vector<int> offsets{-2, 0, 1};
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 20; ++seed) {
    std::mt19937_64 rng(seed + 200);
    Tensor w = Tensor::from_matrix(random_matrix(4, 9, rng));
    Tensor b = Tensor::from_vector(random_matrix(4, 1, rng));
    const Matrix x = random_matrix(8, 3, rng);
    if (!clear_of_kinks(x, offsets, w, b, 1e-3)) continue;
    ++checked;
    const Matrix r = random_matrix(5, 4, rng);
    ParamList params{{"w", &w}, {"b", &b}};
    auto loss = [&] { return (tdnn_forward(x, offsets, w, b).array() * r.array()).sum(); };
    Matrix dx;
    double err = grad_check_params(params, loss, [&] {
      TdnnCache c;
      tdnn_forward(x, offsets, w, b, &c);
      dx = tdnn_backward(c, offsets, x.rows(), w, b, r);
    });
    EXPECT_LT(err, 1e-5) << "seed " << seed;
    auto fx = [&](const Matrix &xx) { return (tdnn_forward(xx, offsets, w, b).array() * r.array()).sum(); };
    EXPECT_LT(input_check(x, fx, dx), 1e-5) << "seed " << seed;
  }
}

TEST(StatsPool, PopulationStatistics) {
  Matrix x(4, 2);
  x << 1, 0, 2, 0, 3, 0, 4, 0;
  Vector v = stats_pool_forward(x, Pooling::kVariance);
  EXPECT_DOUBLE_EQ(v[0], 2.5);
  EXPECT_DOUBLE_EQ(v[2], 1.25);  // (2.25 + 0.25 + 0.25 + 2.25) / 4
  Vector s = stats_pool_forward(x, Pooling::kStddev);
  EXPECT_NEAR(s[2], std::sqrt(1.25), 1e-9);
  EXPECT_NEAR(s[3], std::sqrt(kPoolingVarianceEps), 1e-15);  // constant channel stays finite
  EXPECT_THROW(stats_pool_forward(x.topRows(1), Pooling::kStddev), LengthError);
  EXPECT_EQ(parse_pooling("var"), Pooling::kVariance);
  EXPECT_THROW(parse_pooling("max"), ArgumentError);
}

TEST(StatsPool, GradientsPassFiniteDifferences) {
  for (Pooling mode : {Pooling::kStddev, Pooling::kVariance}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed + 300);
      const Matrix x = random_matrix(7, 3, rng);
      const Vector r = random_matrix(6, 1, rng);
      PoolCache c;
      stats_pool_forward(x, mode, &c);
      Matrix dx = stats_pool_backward(c, mode, x, r);
      auto f = [&](const Matrix &xx) { return stats_pool_forward(xx, mode).dot(r); };
      EXPECT_LT(input_check(x, f, dx), 1e-5) << pooling_name(mode) << " seed " << seed;
    }
  }
}

TEST(Quadratic, DenseAndDiagonalAgreeAndDifferentiate) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 400);
    const Eigen::Index d = 4;
    Vector e = random_matrix(d, 1, rng), t = random_matrix(d, 1, rng);
    Vector pd = random_matrix(d, 1, rng), qd = random_matrix(d, 1, rng);
    Matrix p = pd.asDiagonal(), q = qd.asDiagonal();
    EXPECT_NEAR(quadratic_score(e, t, p, q, 0.3), quadratic_score_diag(e, t, pd, qd, 0.3), 1e-12);

    Matrix a = random_matrix(d, d, rng), bm = random_matrix(d, d, rng);
    Matrix ps = a + a.transpose(), qs = bm + bm.transpose();
    auto g = quadratic_score_backward(e, t, ps, qs);
    Matrix et(2, d);
    et << e.transpose(), t.transpose();
    Matrix analytic(2, d);
    analytic << g.d_enroll.transpose(), g.d_test.transpose();
    auto f = [&](const Matrix &x) {
      return quadratic_score(x.row(0).transpose(), x.row(1).transpose(), ps, qs, 0.0);
    };
    EXPECT_LT(input_check(et, f, analytic), 1e-5);

    auto gd = quadratic_score_diag_backward(e, t, pd, qd);
    Matrix pq(2, d);
    pq << pd.transpose(), qd.transpose();
    Matrix apq(2, d);
    apq << gd.d_p_diag.transpose(), gd.d_q_diag.transpose();
    auto fpq = [&](const Matrix &x) {
      return quadratic_score_diag(e, t, x.row(0).transpose(), x.row(1).transpose(), 0.0);
    };
    EXPECT_LT(input_check(pq, fpq, apq), 1e-5);
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor x = Tensor::from_vector(Vector::Constant(2, 1.0));
  x.grad() = {0.5, -3.0};
  AdamState st;
  st.config.lr = 0.1;
  adam_step({{"x", &x}}, st);
  // Bias correction makes the first update lr * g / |g|.
  EXPECT_NEAR(x.values()[0], 0.9, 1e-6);
  EXPECT_NEAR(x.values()[1], 1.1, 1e-6);
}

TEST(Adam, MatchesReferenceRecursion) {
  Tensor x = Tensor::from_vector(Vector::Constant(1, 2.0));
  AdamState st;
  st.config.lr = 0.05;
  double ref = 2.0, m = 0, v = 0;
  for (int step = 1; step <= 50; ++step) {
    const double g = 2.0 * ref;  // d/dx x^2
    x.grad() = {2.0 * x.values()[0]};
    adam_step({{"x", &x}}, st);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, step)), vh = v / (1 - std::pow(0.999, step));
    ref -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(x.values()[0], ref, 1e-12);
  }
  EXPECT_LT(std::abs(ref), 2.0);
}

TEST(Adam, FrozenAndNonFinite) {
  Tensor a = Tensor::from_vector(Vector::Constant(1, 1.0));
  Tensor b = Tensor::from_vector(Vector::Constant(1, 1.0));
  a.grad() = {1.0};
  b.grad() = {1.0};
  AdamState st;
  adam_step({{"a", &a}, {"b", &b}}, st, {"b"});
  EXPECT_NE(a.values()[0], 1.0);
  EXPECT_EQ(b.values()[0], 1.0);
  a.grad() = {std::nan("")};
  EXPECT_THROW(adam_step({{"a", &a}, {"b", &b}}, st), OptimizerError);
}

TEST(GradCheck, DetectsWrongGradient) {
  std::vector<double> x{1.0, 2.0};
  auto f = [](std::span<const double> v) { return v[0] * v[0] + 3.0 * v[1]; };
  std::vector<double> good{2.0, 3.0}, bad{2.0, 3.3};
  EXPECT_LT(grad_check(f, x, good), 1e-8);
  EXPECT_GT(grad_check(f, x, bad), 0.05);
}

}  // namespace
}  // namespace spkv::nn
