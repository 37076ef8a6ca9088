// spkv/gplda.hpp

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

// Generative Gaussian PLDA.
//
// Embeddings are first centered, projected with LDA and length normalized.
// On the processed vectors the model is
//
//   eta = m + y + e,   y ~ N(0, B) shared by a speaker,  e ~ N(0, W),
//
// with across-class covariance B (= Phi Phi^T for a rank-q subspace model)
// and within-class covariance W. For a trial (a, b), centered at m, the
// same-speaker versus different-speaker log-likelihood ratio is
//
//   llr(a, b) = 1/2 (a'Qa + b'Qb + 2 a'Pb) + k
//   Q = T^-1 - (T - B T^-1 B)^-1,   P = T^-1 B (T - B T^-1 B)^-1,  T = B + W.
//
// A transform V with V'WV = I and V'BV = diag(psi) makes P and Q diagonal, so
// scoring runs per dimension on u = V'(eta - m):
//
//   llr = sum_i q_i (u_ei^2 + u_ti^2) + 2 p_i u_ei u_ti + k,
//   q_i = 1/2 (1/(1+psi_i) - (1+psi_i)/(1+2 psi_i)),   p_i = 1/2 psi_i/(1+2 psi_i),
//   k = sum_i log(1+psi_i) - 1/2 log(1+2 psi_i).
//
// The p, q stored in PldaModel already include the factor 1/2, so they plug
// straight into nn::quadratic_score_diag.

#ifndef SPKV_GPLDA_HPP_
#define SPKV_GPLDA_HPP_

#include <cmath>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "spkv/container.hpp"
#include "spkv/data.hpp"
#include "spkv/nn.hpp"

namespace spkv::gplda {

// ---------------------------------------------------------------------------
// Preprocessing

struct PreprocessChain {
  Vector mean;        // D
  Matrix lda;         // D' x D
  bool length_norm = true;

  Eigen::Index input_dim() const { return lda.cols(); }
  Eigen::Index output_dim() const { return lda.rows(); }

  Vector apply(const Eigen::Ref<const Vector> &x) const {
    if (x.size() != input_dim())
      throw DimensionError("preprocess: embedding dimension " + std::to_string(x.size()) +
                           ", expected " + std::to_string(input_dim()));
    Vector y = lda * (x - mean);
    return length_norm ? nn::length_norm(y) : y;
  }

  /// No centering, identity projection.
  static PreprocessChain identity(Eigen::Index dim, bool length_norm = false) {
    return {Vector::Zero(dim), Matrix::Identity(dim, dim), length_norm};
  }
};

/// Embeddings as rows plus dense class indices.
struct LabeledMatrix {
  Matrix x;
  std::vector<int> cls;
  int num_classes = 0;
};

inline LabeledMatrix labeled_embeddings(const UtteranceSet &utts) {
  LabeledMatrix out;
  if (utts.empty()) throw ArgumentError("no embeddings");
  out.x.resize(static_cast<Eigen::Index>(utts.size()), utts.dim());
  std::unordered_map<std::string, int> ids;
  for (size_t i = 0; i < utts.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = utts[i].embedding().transpose();
    auto [it, inserted] = ids.emplace(utts[i].speaker_id, static_cast<int>(ids.size()));
    out.cls.push_back(it->second);
  }
  out.num_classes = static_cast<int>(ids.size());
  return out;
}

namespace detail {

struct ClassStats {
  std::vector<int> counts;
  Matrix means;      // num_classes x D
  Matrix scatter;    // sum over classes of sum_r (x_r - mean_c)(x_r - mean_c)^T
  Vector mean;       // mean over all rows
};

inline ClassStats class_stats(const LabeledMatrix &data) {
  const Eigen::Index dim = data.x.cols();
  ClassStats s;
  s.counts.assign(static_cast<size_t>(data.num_classes), 0);
  s.means = Matrix::Zero(data.num_classes, dim);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    const int c = data.cls[static_cast<size_t>(i)];
    s.means.row(c) += data.x.row(i);
    ++s.counts[static_cast<size_t>(c)];
  }
  for (int c = 0; c < data.num_classes; ++c) {
    if (s.counts[static_cast<size_t>(c)] == 0) throw ArgumentError("class without examples");
    s.means.row(c) /= static_cast<double>(s.counts[static_cast<size_t>(c)]);
  }
  s.mean = data.x.colwise().mean().transpose();
  Matrix centered(data.x.rows(), dim);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i)
    centered.row(i) = data.x.row(i) - s.means.row(data.cls[static_cast<size_t>(i)]);
  s.scatter = centered.transpose() * centered;
  return s;
}

inline Matrix symmetrize(const Matrix &m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

/// Centering plus LDA on raw embeddings. The LDA rows are the leading
/// generalized eigenvectors of (between-class, within-class) scatter,
/// scaled so that v' S_w v = 1.
inline PreprocessChain fit_preprocess(const LabeledMatrix &data, int target_dim = 170,
                                      bool length_norm = true) {
  if (data.num_classes < 2) throw ArgumentError("LDA needs at least 2 speakers");
  const Eigen::Index dim = data.x.cols();
  auto st = detail::class_stats(data);
  const double n = static_cast<double>(data.x.rows());

  Matrix within = st.scatter / n;
  Matrix between = Matrix::Zero(dim, dim);
  for (int c = 0; c < data.num_classes; ++c) {
    Vector d = st.means.row(c).transpose() - st.mean;
    between += static_cast<double>(st.counts[static_cast<size_t>(c)]) * d * d.transpose();
  }
  between /= n;

  Eigen::Index out_dim = std::min<Eigen::Index>({target_dim, dim, data.num_classes - 1});
  if (out_dim < target_dim)
    warn("LDA dimension clamped from " + std::to_string(target_dim) + " to " + std::to_string(out_dim) +
         " (" + std::to_string(dim) + "-dim input, " + std::to_string(data.num_classes) + " speakers)");
  if (out_dim < 1) throw ArgumentError("LDA target dimension must be positive");

  Eigen::SelfAdjointEigenSolver<Matrix> wes(within);
  const double wmax = wes.eigenvalues().maxCoeff(), wmin = wes.eigenvalues().minCoeff();
  if (!(wmin > 1e-10 * std::max(wmax, 1e-300))) {
    const double ridge = 1e-6 * within.trace() / static_cast<double>(dim);
    warn("within-class scatter is singular; adding ridge " + format_double(ridge));
    within += ridge * Matrix::Identity(dim, dim);
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(between, within);
  if (ges.info() != Eigen::Success) throw NumericalError("LDA eigenproblem failed");
  PreprocessChain chain;
  chain.mean = st.mean;
  chain.lda.resize(out_dim, dim);
  for (Eigen::Index i = 0; i < out_dim; ++i)
    chain.lda.row(i) = ges.eigenvectors().col(dim - 1 - i).transpose();
  chain.length_norm = length_norm;
  return chain;
}

inline LabeledMatrix apply_chain(const PreprocessChain &chain, const LabeledMatrix &raw) {
  LabeledMatrix out{Matrix(raw.x.rows(), chain.output_dim()), raw.cls, raw.num_classes};
  for (Eigen::Index i = 0; i < raw.x.rows(); ++i)
    out.x.row(i) = chain.apply(raw.x.row(i).transpose()).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Likelihood and EM

/// Exact log-likelihood of labeled data under the two-covariance model with
/// fixed mean: per class of n rows with mean xbar and scatter S,
///   log N(xbar; m, B + W/n) - (n-1)/2 log|2 pi W| - 1/2 tr(W^-1 S) - D/2 log n.
inline double log_likelihood(const LabeledMatrix &data, const Vector &mean, const Matrix &across,
                             const Matrix &within) {
  const Eigen::Index dim = data.x.cols();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  auto st = detail::class_stats(data);
  Eigen::LLT<Matrix> wllt(within);
  if (wllt.info() != Eigen::Success) throw NumericalError("within-class covariance is not positive definite");
  const double w_logdet = 2.0 * wllt.matrixLLT().diagonal().array().log().sum();
  const double n_total = static_cast<double>(data.x.rows());
  const double n_classes = static_cast<double>(data.num_classes);
  double ll = -0.5 * (n_total - n_classes) * (static_cast<double>(dim) * log2pi + w_logdet) -
              0.5 * wllt.solve(st.scatter).trace();
  std::unordered_map<int, std::pair<Eigen::LLT<Matrix>, double>> by_count;
  for (int c = 0; c < data.num_classes; ++c) {
    const int n = st.counts[static_cast<size_t>(c)];
    auto it = by_count.find(n);
    if (it == by_count.end()) {
      Eigen::LLT<Matrix> g(across + within / static_cast<double>(n));
      if (g.info() != Eigen::Success) throw NumericalError("class-mean covariance is not positive definite");
      const double logdet = 2.0 * g.matrixLLT().diagonal().array().log().sum();
      it = by_count.emplace(n, std::make_pair(std::move(g), logdet)).first;
    }
    const Vector d = st.means.row(c).transpose() - mean;
    ll += -0.5 * (static_cast<double>(dim) * log2pi + it->second.second + d.dot(it->second.first.solve(d))) -
          0.5 * static_cast<double>(dim) * std::log(static_cast<double>(n));
  }
  if (!std::isfinite(ll)) throw NumericalError("non-finite log-likelihood");
  return ll;
}

struct EmConfig {
  int latent_dim = 0;  // 0 = full rank
  int iterations = 20;
  bool average_per_speaker = false;
};

struct EmResult {
  Vector mean;
  Matrix across;
  Matrix within;
  Matrix phi;  // D' x q; set for subspace models
  std::vector<double> log_likelihood;  // initial value, then one per iteration
};

/// EM estimation of (B, W) or of (Phi, W) with B = Phi Phi^T when
/// 0 < latent_dim < D'. The mean is fixed at the data mean.
inline EmResult em_fit(LabeledMatrix data, const EmConfig &cfg) {
  const Eigen::Index dim = data.x.cols();
  if (cfg.latent_dim < 0 || cfg.latent_dim > dim)
    throw ArgumentError("latent dimension " + std::to_string(cfg.latent_dim) + " exceeds data dimension " +
                        std::to_string(dim));
  if (cfg.iterations < 0) throw ArgumentError("negative iteration count");
  if (cfg.average_per_speaker) {
    auto st = detail::class_stats(data);
    LabeledMatrix avg{st.means, {}, data.num_classes};
    for (int c = 0; c < data.num_classes; ++c) avg.cls.push_back(c);
    data = std::move(avg);
  }
  const bool subspace = cfg.latent_dim > 0 && cfg.latent_dim < dim;
  auto st = detail::class_stats(data);
  const double n_total = static_cast<double>(data.x.rows());
  const double n_classes = static_cast<double>(data.num_classes);
  const Matrix eye = Matrix::Identity(dim, dim);

  EmResult r;
  r.mean = st.mean;

  // Initialization from scatter statistics.
  Matrix centered_means = st.means.rowwise() - st.mean.transpose();
  Matrix mean_cov = centered_means.transpose() * centered_means / n_classes;
  Matrix total = (data.x.rowwise() - st.mean.transpose()).transpose() *
                 (data.x.rowwise() - st.mean.transpose()) / n_total;
  Matrix w0 = n_total > n_classes ? Matrix(st.scatter / (n_total - n_classes)) : Matrix(0.5 * total);
  if (Eigen::LLT<Matrix>(w0).info() != Eigen::Success ||
      Eigen::SelfAdjointEigenSolver<Matrix>(w0).eigenvalues().minCoeff() <= 1e-12 * w0.trace()) {
    w0 = 0.5 * total + 1e-6 * (total.trace() / static_cast<double>(dim) + 1e-12) * eye;
  }
  r.within = w0;
  r.across = mean_cov;
  if (subspace) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(mean_cov);
    r.phi.resize(dim, cfg.latent_dim);
    for (int j = 0; j < cfg.latent_dim; ++j) {
      const Eigen::Index col = dim - 1 - j;
      r.phi.col(j) = es.eigenvectors().col(col) * std::sqrt(std::max(es.eigenvalues()[col], 1e-6));
    }
    r.across = r.phi * r.phi.transpose();
  }
  r.log_likelihood.push_back(log_likelihood(data, r.mean, r.across, r.within));

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    if (!subspace) {
      // Hidden speaker offset y per class; its posterior given the class
      // mean m (centered) is N(B G^-1 m, B - B G^-1 B) with G = B + W/n.
      Matrix b_stats = Matrix::Zero(dim, dim);
      Matrix w_stats = st.scatter;
      for (int c = 0; c < data.num_classes; ++c) {
        const double n = static_cast<double>(st.counts[static_cast<size_t>(c)]);
        const Vector m = st.means.row(c).transpose() - r.mean;
        Eigen::LLT<Matrix> g(r.across + r.within / n);
        if (g.info() != Eigen::Success) throw NumericalError("EM: class-mean covariance not positive definite");
        const Vector w = r.across * g.solve(m);
        const Matrix post_var = detail::symmetrize(r.across - r.across * g.solve(r.across));
        const Vector mw = m - w;
        b_stats += post_var + w * w.transpose();
        w_stats += n * (post_var + mw * mw.transpose());
      }
      r.across = detail::symmetrize(b_stats / n_classes);
      r.within = detail::symmetrize(w_stats / n_total);
    } else {
      // Latent omega ~ N(0, I_q) per class; posterior precision
      // L = I + n Phi' W^-1 Phi.
      const Eigen::Index q = r.phi.cols();
      Eigen::LLT<Matrix> wllt(r.within);
      if (wllt.info() != Eigen::Success) throw NumericalError("EM: within-class covariance not positive definite");
      const Matrix winv_phi = wllt.solve(r.phi);
      const Matrix phit_winv_phi = r.phi.transpose() * winv_phi;
      Matrix acc_r = Matrix::Zero(q, q);
      Matrix acc_c = Matrix::Zero(dim, q);
      for (int c = 0; c < data.num_classes; ++c) {
        const double n = static_cast<double>(st.counts[static_cast<size_t>(c)]);
        const Vector m = st.means.row(c).transpose() - r.mean;
        Eigen::LLT<Matrix> l(Matrix::Identity(q, q) + n * phit_winv_phi);
        const Vector ew = l.solve(winv_phi.transpose() * (n * m));
        const Matrix eww = l.solve(Matrix::Identity(q, q)) + ew * ew.transpose();
        acc_r += n * eww;
        acc_c += n * m * ew.transpose();
      }
      r.phi = acc_r.llt().solve(acc_c.transpose()).transpose();
      Matrix xc = data.x.rowwise() - r.mean.transpose();
      r.within = detail::symmetrize((xc.transpose() * xc - r.phi * acc_c.transpose()) / n_total);
      r.across = r.phi * r.phi.transpose();
    }
    r.log_likelihood.push_back(log_likelihood(data, r.mean, r.across, r.within));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Model and scoring forms

struct PldaModel {
  PreprocessChain chain;
  Vector mean;        // mean of processed training vectors
  Matrix across;      // B
  Matrix within;      // W
  Matrix transform;   // V: V'WV = I, V'BV = diag(psi)
  Vector psi;
  Vector p;           // score-ready diagonal coefficients (include the 1/2)
  Vector q;
  double k = 0.0;

  Eigen::Index dim() const { return across.rows(); }
  Matrix total() const { return across + within; }

  /// u = V'(x - m) for a processed vector x.
  Vector project(const Eigen::Ref<const Vector> &processed) const {
    return transform.transpose() * (processed - mean);
  }

  /// LLR of two processed (post-chain) vectors via the diagonal form.
  double score_processed(const Eigen::Ref<const Vector> &a, const Eigen::Ref<const Vector> &b) const {
    return nn::quadratic_score_diag(project(a), project(b), p, q, k);
  }

  double score_raw(const Eigen::Ref<const Vector> &a, const Eigen::Ref<const Vector> &b) const {
    return score_processed(chain.apply(a), chain.apply(b));
  }
};

/// Computes V, psi, p, q, k from the across/within covariances.
inline void finalize(PldaModel &model) {
  const Eigen::Index dim = model.within.rows();
  if (model.across.rows() != dim || model.across.cols() != dim || model.within.cols() != dim)
    throw ShapeError("PLDA covariances must be square and of equal size");
  if (model.mean.size() == 0) model.mean = Vector::Zero(dim);
  Eigen::LLT<Matrix> wllt(model.within);
  if (wllt.info() != Eigen::Success) throw ModelError("within-class covariance is not positive definite");
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(model.across, model.within);
  if (ges.info() != Eigen::Success) throw NumericalError("simultaneous diagonalization failed");
  model.transform = ges.eigenvectors();
  model.psi = ges.eigenvalues().cwiseMax(0.0);
  model.p.resize(dim);
  model.q.resize(dim);
  model.k = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double psi = model.psi[i];
    model.q[i] = 0.5 * (1.0 / (1.0 + psi) - (1.0 + psi) / (1.0 + 2.0 * psi));
    model.p[i] = 0.5 * psi / (1.0 + 2.0 * psi);
    model.k += std::log1p(psi) - 0.5 * std::log1p(2.0 * psi);
  }
}

inline PldaModel make_model(PreprocessChain chain, Vector mean, Matrix across, Matrix within) {
  PldaModel m;
  m.chain = std::move(chain);
  m.mean = std::move(mean);
  m.across = std::move(across);
  m.within = std::move(within);
  finalize(m);
  return m;
}

/// Dense P, Q of the closed form and the constant that makes
/// 1/2 (a'Qa + b'Qb + 2a'Pb) + k the exact LLR.
struct DenseForm {
  Matrix p;
  Matrix q;
  double k;
};

inline DenseForm derive_pq(const PldaModel &model) {
  const Matrix total = model.total();
  const Matrix &ac = model.across;
  auto checked_inverse = [](const Matrix &m, const char *what) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto &sv = svd.singularValues();
    const double cond = sv[0] / sv[sv.size() - 1];
    if (!(cond < 1e12))
      throw NumericalError(std::string(what) + " is singular (condition number " + format_double(cond) + ")");
    return Matrix(m.inverse());
  };
  const Matrix tot_inv = checked_inverse(total, "total covariance");
  const Matrix inner_inv = checked_inverse(total - ac * tot_inv * ac, "total - across total^-1 across");
  DenseForm f;
  f.q = detail::symmetrize(tot_inv - inner_inv);
  f.p = detail::symmetrize(tot_inv * ac * inner_inv);
  // k = -1/2 log|J| + log|T|, J = [[T, B], [B, T]]; |J| = |T| |T - B T^-1 B|.
  Eigen::LLT<Matrix> tl(total);
  Eigen::LLT<Matrix> il(total - ac * tot_inv * ac);
  const double logdet_t = 2.0 * tl.matrixLLT().diagonal().array().log().sum();
  const double logdet_i = 2.0 * il.matrixLLT().diagonal().array().log().sum();
  f.k = -0.5 * (logdet_t + logdet_i) + logdet_t;
  return f;
}

/// LLR of processed vectors through the dense form.
inline double score_dense(const PldaModel &model, const DenseForm &f, const Eigen::Ref<const Vector> &a,
                          const Eigen::Ref<const Vector> &b) {
  const Vector ac = a - model.mean, bc = b - model.mean;
  return nn::quadratic_score(ac, bc, 0.5 * f.p, 0.5 * f.q, f.k);
}

/// Same-speaker versus different-speaker log-likelihood ratio by direct
/// evaluation of the joint and marginal Gaussian densities.
inline double llr_oracle(const PldaModel &model, const Eigen::Ref<const Vector> &a,
                         const Eigen::Ref<const Vector> &b) {
  const Eigen::Index d = model.dim();
  const Matrix total = model.total();
  Matrix joint(2 * d, 2 * d);
  joint << total, model.across, model.across, total;
  Vector z(2 * d);
  z << a - model.mean, b - model.mean;
  auto log_normal = [](const Vector &x, const Matrix &cov) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet +
                   x.dot(llt.solve(x)));
  };
  return log_normal(z, joint) - log_normal(a - model.mean, total) - log_normal(b - model.mean, total);
}

/// Scores each trial after applying the model's preprocessing chain to the
/// raw embeddings. Each utterance is processed once.
inline ScoredTrialSet score_trials(const PldaModel &model, const std::vector<Trial> &trials,
                                   const UtteranceSet &utts) {
  check_trials_resolve(trials, utts);
  std::unordered_map<std::string, Vector> projected;
  auto get = [&](const std::string &id) -> const Vector & {
    auto it = projected.find(id);
    if (it == projected.end())
      it = projected.emplace(id, model.project(model.chain.apply(utts.at(id).embedding()))).first;
    return it->second;
  };
  ScoredTrialSet out;
  out.reserve(trials.size());
  for (const Trial &t : trials)
    out.push_back({t, nn::quadratic_score_diag(get(t.enroll_id), get(t.test_id), model.p, model.q, model.k)});
  return out;
}

// ---------------------------------------------------------------------------
// Training and persistence

struct GpldaConfig {
  int lda_dim = 170;
  bool length_norm = true;
  EmConfig em;
};

inline PldaModel train_gplda(const UtteranceSet &train, const GpldaConfig &cfg, EmResult *trace = nullptr) {
  LabeledMatrix raw = labeled_embeddings(train);
  PreprocessChain chain = fit_preprocess(raw, cfg.lda_dim, cfg.length_norm);
  EmResult em = em_fit(apply_chain(chain, raw), cfg.em);
  PldaModel model = make_model(std::move(chain), em.mean, em.across, em.within);
  if (trace) *trace = std::move(em);
  return model;
}

inline Container to_container(const PldaModel &m) {
  Container c;
  c.set_meta("kind", "gplda");
  c.set_meta("length_norm", m.chain.length_norm ? "1" : "0");
  c.put_vector("chain_mean", m.chain.mean);
  c.put_matrix("lda", m.chain.lda);
  c.put_vector("plda_mean", m.mean);
  c.put_matrix("across", m.across);
  c.put_matrix("within", m.within);
  c.put_matrix("transform", m.transform);
  c.put_vector("psi", m.psi);
  c.put_vector("p", m.p);
  c.put_vector("q", m.q);
  c.put_scalar("k", m.k);
  return c;
}

inline PldaModel from_container(const Container &c) {
  if (!c.has_meta("kind") || c.meta("kind") != "gplda") throw ParseError("not a gplda model");
  PldaModel m;
  m.chain.length_norm = c.meta("length_norm") == "1";
  m.chain.mean = c.get_vector("chain_mean");
  m.chain.lda = c.get_matrix("lda");
  m.mean = c.get_vector("plda_mean");
  m.across = c.get_matrix("across");
  m.within = c.get_matrix("within");
  m.transform = c.get_matrix("transform");
  m.psi = c.get_vector("psi");
  m.p = c.get_vector("p");
  m.q = c.get_vector("q");
  m.k = c.get_scalar("k");
  const Eigen::Index d = m.across.rows();
  if (m.chain.lda.rows() != d || m.chain.mean.size() != m.chain.lda.cols() || m.mean.size() != d ||
      m.within.rows() != d || m.transform.rows() != d || m.p.size() != d || m.q.size() != d)
    throw ParseError("gplda model arrays have inconsistent shapes");
  return m;
}

}  // namespace spkv::gplda

#endif  // SPKV_GPLDA_HPP_
