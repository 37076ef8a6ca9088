// tests/gplda_test.cpp

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

#include <numbers>
#include <random>
#include <sstream>

#include "spkv/gplda.hpp"

namespace spkv::gplda {
namespace {

Matrix random_spd(Eigen::Index d, std::mt19937_64 &rng, double ridge) {
  std::normal_distribution<double> n;
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  return a * a.transpose() / static_cast<double>(d) + ridge * Matrix::Identity(d, d);
}

Vector random_vector(Eigen::Index d, std::mt19937_64 &rng) {
  std::normal_distribution<double> n;
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = n(rng);
  return v;
}

// log N(x; 0, C) by LU, kept apart from the library's Cholesky path.
double log_gauss(const Vector &x, const Matrix &c) {
  Eigen::FullPivLU<Matrix> lu(c);
  const double logdet = std::log(std::abs(lu.determinant()));
  return -0.5 * (static_cast<double>(x.size()) * std::log(2 * std::numbers::pi) + logdet + x.dot(lu.solve(x)));
}

double reference_llr(const Matrix &b, const Matrix &w, const Vector &mean, const Vector &x1, const Vector &x2) {
  const Eigen::Index d = b.rows();
  Matrix t = b + w;
  Matrix joint(2 * d, 2 * d);
  joint << t, b, b, t;
  Vector z(2 * d);
  z << x1 - mean, x2 - mean;
  return log_gauss(z, joint) - log_gauss(x1 - mean, t) - log_gauss(x2 - mean, t);
}

PldaModel identity_chain_model(Eigen::Index d, std::mt19937_64 &rng) {
  Matrix b = random_spd(d, rng, 0.05);
  Matrix w = random_spd(d, rng, 0.2);
  return make_model(PreprocessChain::identity(d), random_vector(d, rng), b, w);
}

TEST(Plda, HandValueOneDimension) {
  Matrix one = Matrix::Ones(1, 1);
  PldaModel m = make_model(PreprocessChain::identity(1), Vector::Zero(1), one, one);
  DenseForm f = derive_pq(m);
  EXPECT_NEAR(f.q(0, 0), -1.0 / 6.0, 1e-12);
  EXPECT_NEAR(f.p(0, 0), 1.0 / 3.0, 1e-12);
  // psi = 1: halved diagonal coefficients.
  EXPECT_NEAR(m.q[0], -1.0 / 12.0, 1e-12);
  EXPECT_NEAR(m.p[0], 1.0 / 6.0, 1e-12);
}

TEST(Plda, DiagonalizationInvariants) {
  std::mt19937_64 rng(3);
  PldaModel m = identity_chain_model(5, rng);
  Matrix vwv = m.transform.transpose() * m.within * m.transform;
  Matrix vbv = m.transform.transpose() * m.across * m.transform;
  EXPECT_LT((vwv - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((vbv - Matrix(m.psi.asDiagonal())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Plda, ScoreFormsAgreeWithReference) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(seed % 8);
    PldaModel m = identity_chain_model(d, rng);
    DenseForm f = derive_pq(m);
    for (int k = 0; k < 20; ++k) {
      Vector a = random_vector(d, rng), b = random_vector(d, rng);
      const double ref = reference_llr(m.across, m.within, m.mean, a, b);
      EXPECT_NEAR(m.score_processed(a, b), ref, 1e-9);
      EXPECT_NEAR(score_dense(m, f, a, b), ref, 1e-9);
      EXPECT_NEAR(llr_oracle(m, a, b), ref, 1e-9);
      EXPECT_NEAR(m.score_processed(a, b), m.score_processed(b, a), 1e-12);
    }
  }
}

TEST(Plda, SingularTotalIsReported) {
  Matrix b = Matrix::Zero(2, 2);
  Matrix w = Matrix::Identity(2, 2);
  PldaModel m = make_model(PreprocessChain::identity(2), Vector::Zero(2), b, w);
  m.within = Matrix::Zero(2, 2);  // total collapses
  EXPECT_THROW(derive_pq(m), NumericalError);
  EXPECT_THROW(make_model(PreprocessChain::identity(2), Vector::Zero(2), b, Matrix::Zero(2, 2)), ModelError);
}

// Likelihood of one class by the stacked Gaussian with covariance
// 1 1' (x) B + I (x) W.
double reference_class_ll(const Matrix &x, const Vector &mean, const Matrix &b, const Matrix &w) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Matrix c(n * d, n * d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) c.block(i * d, j * d, d, d) = b + (i == j ? w : Matrix::Zero(d, d));
  Vector z(n * d);
  for (Eigen::Index i = 0; i < n; ++i) z.segment(i * d, d) = x.row(i).transpose() - mean;
  return log_gauss(z, c);
}

TEST(Em, LogLikelihoodMatchesStackedGaussian) {
  std::mt19937_64 rng(5);
  LabeledMatrix data;
  data.num_classes = 3;
  const std::vector<int> sizes{1, 2, 4};
  data.x.resize(7, 3);
  for (int c = 0, row = 0; c < 3; ++c)
    for (int i = 0; i < sizes[static_cast<size_t>(c)]; ++i, ++row) {
      data.x.row(row) = random_vector(3, rng).transpose();
      data.cls.push_back(c);
    }
  Matrix b = random_spd(3, rng, 0.1), w = random_spd(3, rng, 0.3);
  Vector mean = random_vector(3, rng);
  double ref = 0.0;
  for (int c = 0, row = 0; c < 3; ++c) {
    ref += reference_class_ll(data.x.middleRows(row, sizes[static_cast<size_t>(c)]), mean, b, w);
    row += sizes[static_cast<size_t>(c)];
  }
  EXPECT_NEAR(log_likelihood(data, mean, b, w), ref, 1e-9);
}

UtteranceSet plda_data(int d, int q, int speakers, int utts, std::uint64_t seed, Matrix *phi_out = nullptr,
                       Matrix *sigma_out = nullptr) {
  std::mt19937_64 rng(seed);
  Matrix phi(d, q);
  std::normal_distribution<double> n;
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi.data()[i] = n(rng);
  Matrix sigma = random_spd(d, rng, 0.3);
  if (phi_out) *phi_out = phi;
  if (sigma_out) *sigma_out = sigma;
  return synth_plda_embeddings(phi, sigma, speakers, utts, rng());
}

TEST(Em, LikelihoodNeverDecreases) {
  for (int latent : {0, 2}) {
    UtteranceSet s = plda_data(4, 2, 60, 5, 9);
    EmConfig c;
    c.latent_dim = latent;
    c.iterations = 15;
    EmResult r = em_fit(labeled_embeddings(s), c);
    ASSERT_EQ(r.log_likelihood.size(), 16u);
    for (size_t i = 1; i < r.log_likelihood.size(); ++i)
      EXPECT_GE(r.log_likelihood[i], r.log_likelihood[i - 1] - 1e-7 * std::abs(r.log_likelihood[i - 1]))
          << "latent " << latent << " iteration " << i;
  }
}

TEST(Em, RecoversGeneratingCovariances) {
  Matrix phi, sigma;
  UtteranceSet s = plda_data(3, 3, 3000, 6, 21, &phi, &sigma);
  EmConfig c;
  c.iterations = 30;
  EmResult r = em_fit(labeled_embeddings(s), c);
  Matrix b = phi * phi.transpose();
  EXPECT_LT((r.within - sigma).norm() / sigma.norm(), 0.05);
  EXPECT_LT((r.across - b).norm() / b.norm(), 0.1);
}

TEST(Em, SubspaceRankIsRespected) {
  UtteranceSet s = plda_data(5, 2, 200, 4, 22);
  EmConfig c;
  c.latent_dim = 2;
  c.iterations = 5;
  EmResult r = em_fit(labeled_embeddings(s), c);
  ASSERT_EQ(r.phi.cols(), 2);
  Eigen::SelfAdjointEigenSolver<Matrix> es(r.across);
  EXPECT_LT(std::abs(es.eigenvalues()[2]), 1e-8 * es.eigenvalues()[4]);
  c.latent_dim = 9;
  EXPECT_THROW(em_fit(labeled_embeddings(s), c), ArgumentError);
}

TEST(Em, AveragePerSpeakerUsesOneVectorPerClass) {
  UtteranceSet s = plda_data(3, 2, 100, 4, 23);
  EmConfig c;
  c.average_per_speaker = true;
  c.iterations = 3;
  EmResult r = em_fit(labeled_embeddings(s), c);
  EXPECT_TRUE(r.within.allFinite());
  EXPECT_TRUE(r.across.allFinite());
}

TEST(Lda, WhitensWithinClassAndOrdersByDiscrimination) {
  UtteranceSet s = plda_data(6, 3, 300, 5, 31);
  LabeledMatrix raw = labeled_embeddings(s);
  PreprocessChain chain = fit_preprocess(raw, 4, false);
  ASSERT_EQ(chain.output_dim(), 4);
  LabeledMatrix out = apply_chain(chain, raw);
  auto st = detail::class_stats(out);
  Matrix sw = st.scatter / static_cast<double>(out.x.rows());
  EXPECT_LT((sw - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-8);
  std::vector<std::string> warnings;
  auto saved = warning_sink();
  warning_sink() = [&](const std::string &m) { warnings.push_back(m); };
  PreprocessChain clamped = fit_preprocess(raw, 50, false);
  warning_sink() = saved;
  EXPECT_EQ(clamped.output_dim(), 6);
  ASSERT_EQ(warnings.size(), 1u);
}

TEST(Gplda, TrainScoreAndPersist) {
  UtteranceSet train = plda_data(8, 4, 200, 6, 41);
  GpldaConfig c;
  c.lda_dim = 6;
  c.em.iterations = 5;
  PldaModel m = train_gplda(train, c);
  EXPECT_EQ(m.dim(), 6);
  std::vector<Trial> trials{{train[0].id, train[1].id, Label::kTarget}, {train[0].id, train[10].id, Label::kNontarget}};
  ScoredTrialSet s = score_trials(m, trials, train);
  EXPECT_GT(s[0].score, s[1].score);
  EXPECT_NEAR(s[0].score, m.score_raw(train[0].embedding(), train[1].embedding()), 1e-12);

  std::stringstream ss;
  to_container(m).write(ss);
  PldaModel back = from_container(Container::read(ss));
  ScoredTrialSet s2 = score_trials(back, trials, train);
  EXPECT_EQ(s2[0].score, s[0].score);
  EXPECT_EQ(s2[1].score, s[1].score);
  Container wrong;
  wrong.set_meta("kind", "nplda");
  EXPECT_THROW(from_container(wrong), ParseError);
  std::vector<Trial> ghost{{"nobody", train[0].id, Label::kTarget}};
  EXPECT_THROW(score_trials(m, ghost, train), LookupError);
}

TEST(Gplda, DimensionMismatchIsRejected) {
  UtteranceSet train = plda_data(4, 2, 50, 4, 42);
  GpldaConfig c;
  c.lda_dim = 3;
  c.em.iterations = 2;
  PldaModel m = train_gplda(train, c);
  EXPECT_THROW(m.score_raw(Vector::Zero(5), Vector::Zero(5)), DimensionError);
}

}  // namespace
}  // namespace spkv::gplda
