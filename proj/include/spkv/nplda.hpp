// spkv/nplda.hpp

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

// Neural PLDA: the GPLDA pipeline written as a trainable network
//
//   h = W1 x + b1            (centering and LDA)
//   h <- h / |h|             (optional length normalization)
//   a = W2 h + b2            (centering and diagonalizing transform)
//   s = a_e' Q a_e + a_t' Q a_t + 2 a_e' P a_t + k,   P, Q diagonal
//
// trained with a sigmoid-smoothed detection cost. The shared training loop
// here also drives the end-to-end model.

#ifndef SPKV_NPLDA_HPP_
#define SPKV_NPLDA_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "spkv/container.hpp"
#include "spkv/gplda.hpp"
#include "spkv/metrics.hpp"
#include "spkv/nn.hpp"
#include "spkv/sampling.hpp"

namespace spkv::nplda {

struct NpldaParams {
  nn::Tensor w1, b1, w2, b2, p, q, k, theta;
  bool length_norm = true;

  nn::ParamList params() {
    return {{"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2},
            {"p", &p},   {"q", &q},   {"k", &k},   {"theta", &theta}};
  }
  Eigen::Index input_dim() const { return w1.cols(); }
  Eigen::Index dim() const { return w2.rows(); }

  bool operator==(const NpldaParams &o) const = default;
};

/// Copies the GPLDA pipeline into the network so that, before training, its
/// scores equal the GPLDA scores.
inline NpldaParams init_from_gplda(const gplda::PldaModel &model, double theta = 0.0) {
  NpldaParams n;
  n.w1 = nn::Tensor::from_matrix(model.chain.lda);
  n.b1 = nn::Tensor::from_vector(-model.chain.lda * model.chain.mean);
  n.length_norm = model.chain.length_norm;
  const Matrix vt = model.transform.transpose();
  n.w2 = nn::Tensor::from_matrix(vt);
  n.b2 = nn::Tensor::from_vector(-vt * model.mean);
  n.p = nn::Tensor::from_vector(model.p);
  n.q = nn::Tensor::from_vector(model.q);
  n.k = nn::Tensor::scalar(model.k);
  n.theta = nn::Tensor::scalar(theta);
  return n;
}

/// The minimum-cost threshold of a scored set, kept finite.
inline double finite_min_dcf_threshold(const ScoredTrialSet &scored, const metrics::DcfWeights &w) {
  double th = metrics::min_dcf(scored, w).threshold;
  if (std::isfinite(th)) return th;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto &s : scored) {
    lo = std::min(lo, s.score);
    hi = std::max(hi, s.score);
  }
  return th > 0 ? hi + 1.0 : lo - 1.0;
}

// ---------------------------------------------------------------------------
// Forward and backward over a matrix of inputs (one row per utterance) and a
// list of (enroll row, test row) pairs.

struct PairIndex {
  Eigen::Index enroll;
  Eigen::Index test;
};

struct HeadCache {
  Matrix x;
  Matrix h1;
  nn::LengthNormCache ln;
  Matrix a;
};

inline HeadCache head_forward(const NpldaParams &n, const Eigen::Ref<const Matrix> &x) {
  if (x.cols() != n.input_dim())
    throw DimensionError("nplda: input dimension " + std::to_string(x.cols()) + ", expected " +
                         std::to_string(n.input_dim()));
  HeadCache c;
  c.x = x;
  c.h1 = nn::affine_forward(x, n.w1, n.b1);
  if (n.length_norm) {
    c.ln = nn::length_norm_forward(c.h1);
    c.a = nn::affine_forward(c.ln.y, n.w2, n.b2);
  } else {
    c.a = nn::affine_forward(c.h1, n.w2, n.b2);
  }
  return c;
}

inline Vector pair_scores(const NpldaParams &n, const HeadCache &c, const std::vector<PairIndex> &pairs) {
  Vector s(static_cast<Eigen::Index>(pairs.size()));
  const double k = n.k.value();
  for (size_t i = 0; i < pairs.size(); ++i)
    s[static_cast<Eigen::Index>(i)] =
        nn::quadratic_score_diag(c.a.row(pairs[i].enroll).transpose(), c.a.row(pairs[i].test).transpose(),
                                 n.p.vector(), n.q.vector(), k);
  return s;
}

/// Accumulates parameter grads (all but theta) for dL/ds = d_scores and
/// returns dL/dx.
inline Matrix head_backward(NpldaParams &n, const HeadCache &c, const std::vector<PairIndex> &pairs,
                            const Eigen::Ref<const Vector> &d_scores) {
  Matrix da = Matrix::Zero(c.a.rows(), c.a.cols());
  auto dp = n.p.grad_vector();
  auto dq = n.q.grad_vector();
  double dk = 0.0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const double ds = d_scores[static_cast<Eigen::Index>(i)];
    if (ds == 0.0) continue;
    const Vector e = c.a.row(pairs[i].enroll).transpose();
    const Vector t = c.a.row(pairs[i].test).transpose();
    auto g = nn::quadratic_score_diag_backward(e, t, n.p.vector(), n.q.vector());
    da.row(pairs[i].enroll) += ds * g.d_enroll.transpose();
    da.row(pairs[i].test) += ds * g.d_test.transpose();
    dp += ds * g.d_p_diag;
    dq += ds * g.d_q_diag;
    dk += ds;
  }
  n.k.grad()[0] += dk;
  Matrix dh1;
  if (n.length_norm) {
    Matrix dy = nn::affine_backward(c.ln.y, n.w2, n.b2, da);
    dh1 = nn::length_norm_backward(c.ln, dy);
  } else {
    dh1 = nn::affine_backward(c.h1, n.w2, n.b2, da);
  }
  return nn::affine_backward(c.x, n.w1, n.b1, dh1);
}

/// Scores of two raw embeddings.
inline double score(const NpldaParams &n, const Eigen::Ref<const Vector> &enroll,
                    const Eigen::Ref<const Vector> &test) {
  Matrix x(2, enroll.size());
  x.row(0) = enroll.transpose();
  x.row(1) = test.transpose();
  return pair_scores(n, head_forward(n, x), {{0, 1}})[0];
}

/// Rows of `utts` referenced by the trials, plus the trial pairs as row
/// indices into that matrix. Each utterance appears once.
struct PairBatch {
  std::vector<std::string> ids;
  std::vector<PairIndex> pairs;
  std::vector<Label> labels;  // empty if any trial is unlabeled
};

inline PairBatch index_trials(const std::vector<Trial> &trials) {
  PairBatch b;
  std::unordered_map<std::string, Eigen::Index> row;
  auto index = [&](const std::string &id) {
    auto [it, inserted] = row.emplace(id, static_cast<Eigen::Index>(b.ids.size()));
    if (inserted) b.ids.push_back(id);
    return it->second;
  };
  bool labeled = true;
  for (const Trial &t : trials) {
    const Eigen::Index e = index(t.enroll_id);
    b.pairs.push_back({e, index(t.test_id)});
    labeled &= t.label.has_value();
  }
  if (labeled)
    for (const Trial &t : trials) b.labels.push_back(*t.label);
  return b;
}

inline Matrix embedding_rows(const UtteranceSet &utts, const std::vector<std::string> &ids) {
  if (ids.empty()) return Matrix(0, std::max<Eigen::Index>(utts.dim(), 0));
  Matrix x(static_cast<Eigen::Index>(ids.size()), utts.dim());
  for (size_t i = 0; i < ids.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = utts.at(ids[i]).embedding();
  return x;
}

inline ScoredTrialSet score_trials(const NpldaParams &n, const std::vector<Trial> &trials,
                                   const UtteranceSet &utts) {
  check_trials_resolve(trials, utts);
  PairBatch b = index_trials(trials);
  Vector s = pair_scores(n, head_forward(n, embedding_rows(utts, b.ids)), b.pairs);
  ScoredTrialSet out;
  out.reserve(trials.size());
  for (size_t i = 0; i < trials.size(); ++i) out.push_back({trials[i], s[static_cast<Eigen::Index>(i)]});
  return out;
}

// ---------------------------------------------------------------------------
// Soft detection cost
//
//   P_miss = mean over targets of sigmoid(alpha (theta - s))
//   P_fa   = mean over non-targets of sigmoid(alpha (s - theta))
//   loss   = P_miss + beta P_fa

struct LossConfig {
  double alpha = 10.0;
  metrics::DcfWeights weights;
};

struct LossResult {
  double loss = 0.0;
  double p_miss = 0.0;
  double p_fa = 0.0;
  Vector d_scores;
  double d_theta = 0.0;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// A class absent from the batch contributes nothing.
inline LossResult soft_dcf_loss(const Eigen::Ref<const Vector> &scores, const std::vector<Label> &labels,
                                double theta, const LossConfig &cfg) {
  if (static_cast<size_t>(scores.size()) != labels.size())
    throw ShapeError("soft dcf: " + std::to_string(scores.size()) + " scores, " +
                     std::to_string(labels.size()) + " labels");
  if (!(cfg.alpha > 0)) throw ArgumentError("sigmoid slope alpha must be positive");
  const double beta = cfg.weights.beta();
  size_t n_tar = 0, n_non = 0;
  for (Label l : labels) (l == Label::kTarget ? n_tar : n_non) += 1;
  LossResult r;
  r.d_scores = Vector::Zero(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const bool target = labels[static_cast<size_t>(i)] == Label::kTarget;
    const double z = target ? cfg.alpha * (theta - scores[i]) : cfg.alpha * (scores[i] - theta);
    const double sg = sigmoid(z);
    const double slope = cfg.alpha * sg * (1.0 - sg);
    if (target) {
      r.p_miss += sg / static_cast<double>(n_tar);
      r.d_scores[i] = -slope / static_cast<double>(n_tar);
    } else {
      r.p_fa += sg / static_cast<double>(n_non);
      r.d_scores[i] = beta * slope / static_cast<double>(n_non);
    }
  }
  r.loss = r.p_miss + beta * r.p_fa;
  r.d_theta = -r.d_scores.sum();
  return r;
}

// ---------------------------------------------------------------------------
// Training loop shared by the NPLDA and end-to-end models

struct TrainConfig {
  int epochs = 10;
  nn::AdamConfig adam;
  LossConfig loss;
  bool learn_theta = true;
  int patience = 1;  // epochs without dev improvement before halving lr
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double lr = 0.0;
  std::optional<double> dev_eer;
  std::optional<double> dev_min_dcf;
};

template <class Model>
struct TrainResult {
  Model best;
  int best_epoch = 0;
  std::vector<EpochRecord> trace;
};

inline void write_trace(std::ostream &os, const std::vector<EpochRecord> &trace) {
  os << "epoch,train_loss,lr,dev_eer,dev_min_dcf\n";
  for (const auto &r : trace) {
    os << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.lr) << ','
       << (r.dev_eer ? format_double(*r.dev_eer) : "") << ','
       << (r.dev_min_dcf ? format_double(*r.dev_min_dcf) : "") << '\n';
  }
}

/// Training batches for one epoch; epoch 0 is the evaluation pass over the
/// initial model.
using BatchSource = std::function<std::vector<sampling::TrialBatch>(int epoch)>;

inline BatchSource fixed_batches(std::vector<sampling::TrialBatch> batches) {
  return [batches = std::move(batches)](int) { return batches; };
}

/// Runs `cfg.epochs` epochs. `prepare(epoch)` loads that epoch's batches and
/// returns their count; they are visited in a freshly shuffled order.
/// `step(model, b, backward)` returns the loss of batch b and, if `backward`,
/// accumulates gradients into model.params() (zeroed beforehand).
/// `eval(model)` returns dev metrics or nullopt. Epoch 0 records the initial
/// model. The returned model is the one with the lowest dev minimum cost (the
/// last one without a dev set).
template <class Model, class Prepare, class Step, class Eval>
TrainResult<Model> train_loop(Model model, Prepare &&prepare, Step &&step, Eval &&eval, const TrainConfig &cfg,
                              const std::vector<std::string> &frozen = {}) {
  if (cfg.epochs < 0) throw ArgumentError("negative epoch count");
  if (!(cfg.adam.lr >= 0)) throw ArgumentError("learning rate must be non-negative");
  std::vector<std::string> frozen_names = frozen;
  if (!cfg.learn_theta) {
    frozen_names.push_back("theta");
    frozen_names.push_back("head.theta");
  }
  auto load = [&](int epoch) {
    const size_t n = prepare(epoch);
    if (n == 0) throw ArgumentError("no training batches for epoch " + std::to_string(epoch));
    return n;
  };

  TrainResult<Model> result{model, 0, {}};
  auto record = [&](int epoch, double loss, double lr, const Model &m) {
    EpochRecord r{epoch, loss, lr, std::nullopt, std::nullopt};
    std::optional<metrics::EvalReport> rep = eval(m);
    if (rep) {
      r.dev_eer = rep->eer;
      r.dev_min_dcf = rep->min_dcf;
    }
    result.trace.push_back(r);
    return r;
  };

  const size_t n0 = load(0);
  double init_loss = 0.0;
  for (size_t b = 0; b < n0; ++b) init_loss += step(model, b, false);
  EpochRecord best = record(0, init_loss / static_cast<double>(n0), cfg.adam.lr, model);

  nn::AdamState state;
  state.config = cfg.adam;
  std::mt19937_64 rng(cfg.seed);
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const size_t n = load(epoch);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (size_t b : order) {
      nn::ParamList params = model.params();
      nn::zero_grads(params);
      const double loss = step(model, b, true);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      total += loss;
      nn::adam_step(params, state, frozen_names);
    }
    EpochRecord r = record(epoch, total / static_cast<double>(n), state.config.lr, model);
    const double cur = r.dev_min_dcf ? *r.dev_min_dcf : r.train_loss;
    const double prev = best.dev_min_dcf ? *best.dev_min_dcf : best.train_loss;
    if (!r.dev_min_dcf) {
      result.best = model;
      result.best_epoch = epoch;
    }
    if (cur < prev) {
      best = r;
      stale = 0;
      if (r.dev_min_dcf) {
        result.best = model;
        result.best_epoch = epoch;
      }
    } else if (++stale >= cfg.patience) {
      state.config.lr *= 0.5;
      stale = 0;
    }
  }
  return result;
}

struct NpldaData {
  std::vector<PairBatch> batches;
  std::vector<Matrix> inputs;
};

inline NpldaData prepare_batches(const std::vector<sampling::TrialBatch> &batches, const UtteranceSet &utts) {
  NpldaData d;
  for (const auto &tb : batches) {
    check_trials_resolve(tb.trials, utts);
    PairBatch b = index_trials(tb.trials);
    if (b.labels.size() != tb.trials.size()) throw ArgumentError("training trials must be labeled");
    d.inputs.push_back(embedding_rows(utts, b.ids));
    d.batches.push_back(std::move(b));
  }
  return d;
}

/// A labeled trial list with the utterances it refers to.
struct DevSet {
  const UtteranceSet *utts = nullptr;
  std::vector<Trial> trials;
};

inline TrainResult<NpldaParams> train(NpldaParams init, const BatchSource &source, const UtteranceSet &train_utts,
                                      const DevSet *dev, const TrainConfig &cfg) {
  NpldaData data;
  auto prepare = [&](int epoch) {
    data = prepare_batches(source(epoch), train_utts);
    return data.batches.size();
  };
  auto step = [&](NpldaParams &m, size_t b, bool backward) {
    const PairBatch &pb = data.batches[b];
    HeadCache c = head_forward(m, data.inputs[b]);
    Vector s = pair_scores(m, c, pb.pairs);
    LossResult lr = soft_dcf_loss(s, pb.labels, m.theta.value(), cfg.loss);
    if (backward) {
      head_backward(m, c, pb.pairs, lr.d_scores);
      m.theta.grad()[0] += lr.d_theta;
    }
    return lr.loss;
  };
  auto eval = [&](const NpldaParams &m) -> std::optional<metrics::EvalReport> {
    if (!dev || !dev->utts) return std::nullopt;
    return metrics::evaluate(score_trials(m, dev->trials, *dev->utts), cfg.loss.weights);
  };
  return train_loop(std::move(init), prepare, step, eval, cfg);
}

inline TrainResult<NpldaParams> train(NpldaParams init, const std::vector<sampling::TrialBatch> &batches,
                                      const UtteranceSet &train_utts, const DevSet *dev,
                                      const TrainConfig &cfg) {
  return train(std::move(init), fixed_batches(batches), train_utts, dev, cfg);
}

// ---------------------------------------------------------------------------
// Persistence

inline void put_params(Container &c, const std::string &prefix, NpldaParams &n) {
  for (auto &[name, t] : n.params()) c.put(prefix + name, *t);
}

inline void get_params(const Container &c, const std::string &prefix, NpldaParams &n) {
  for (auto &[name, t] : n.params()) {
    *t = c.get(prefix + name);
  }
  const Eigen::Index d = n.w2.rows();
  if (n.w1.shape().size() != 2 || n.w2.shape().size() != 2 || n.w2.cols() != n.w1.rows() ||
      static_cast<Eigen::Index>(n.b1.size()) != n.w1.rows() || static_cast<Eigen::Index>(n.b2.size()) != d ||
      static_cast<Eigen::Index>(n.p.size()) != d || static_cast<Eigen::Index>(n.q.size()) != d ||
      n.k.size() != 1 || n.theta.size() != 1)
    throw ParseError("nplda arrays have inconsistent shapes");
}

inline Container to_container(NpldaParams n) {
  Container c;
  c.set_meta("kind", "nplda");
  c.set_meta("length_norm", n.length_norm ? "1" : "0");
  put_params(c, "", n);
  return c;
}

inline NpldaParams from_container(const Container &c) {
  if (!c.has_meta("kind") || c.meta("kind") != "nplda") throw ParseError("not an nplda model");
  NpldaParams n;
  n.length_norm = c.meta("length_norm") == "1";
  get_params(c, "", n);
  return n;
}

}  // namespace spkv::nplda

#endif  // SPKV_NPLDA_HPP_
