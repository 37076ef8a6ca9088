// spkv/e2e.hpp

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

// End-to-end verification model: a TDNN embedding extractor (frame layers,
// statistics pooling, segment affine) whose single parameter set serves both
// the enrollment and the test branch, followed by the NPLDA head.

#ifndef SPKV_E2E_HPP_
#define SPKV_E2E_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spkv/container.hpp"
#include "spkv/data.hpp"
#include "spkv/nn.hpp"
#include "spkv/nplda.hpp"
#include "spkv/sampling.hpp"

namespace spkv::e2e {

struct LayerSpec {
  Eigen::Index k_in = 0;
  Eigen::Index k_out = 0;
  std::vector<int> offsets;

  Eigen::Index context() const { return static_cast<Eigen::Index>(offsets.size()); }
  bool operator==(const LayerSpec &o) const = default;
};

/// "k_in k_out o1 o2 ..."
inline std::string format_layer(const LayerSpec &l) {
  std::string s = std::to_string(l.k_in) + " " + std::to_string(l.k_out);
  for (int o : l.offsets) s += " " + std::to_string(o);
  return s;
}

inline LayerSpec parse_layer(std::string_view text) {
  auto tok = split_ws(text);
  LayerSpec l;
  if (tok.size() < 3 || !parse_int(tok[0], &l.k_in) || !parse_int(tok[1], &l.k_out))
    throw ConfigError("bad layer spec '" + std::string(text) + "' (want: k_in k_out offsets...)");
  for (size_t i = 2; i < tok.size(); ++i) {
    int o = 0;
    if (!parse_int(tok[i], &o)) throw ConfigError("bad context offset '" + std::string(tok[i]) + "'");
    l.offsets.push_back(o);
  }
  return l;
}

struct E2EConfig {
  std::vector<LayerSpec> layers;
  nn::Pooling pooling = nn::Pooling::kStddev;
  Eigen::Index embedding_dim = 32;

  Eigen::Index feature_dim() const { return layers.empty() ? 0 : layers.front().k_in; }
  Eigen::Index pooled_dim() const { return 2 * layers.back().k_out; }

  /// Frames consumed by the frame layers.
  Eigen::Index total_span() const {
    Eigen::Index s = 0;
    for (const auto &l : layers) s += nn::context_span(l.offsets);
    return s;
  }
  Eigen::Index min_frames() const { return total_span() + 2; }

  void validate() const {
    if (layers.empty()) throw ConfigError("e2e config has no layers");
    for (size_t i = 0; i < layers.size(); ++i) {
      const auto &l = layers[i];
      if (l.k_in < 1 || l.k_out < 1) throw ConfigError("layer " + std::to_string(i) + " has a non-positive dim");
      if (l.offsets.empty()) throw ConfigError("layer " + std::to_string(i) + " has no context offsets");
      if (i > 0 && layers[i - 1].k_out != l.k_in)
        throw ConfigError("layer " + std::to_string(i) + " input " + std::to_string(l.k_in) +
                          " does not match previous output " + std::to_string(layers[i - 1].k_out));
    }
    if (embedding_dim < 1) throw ConfigError("embedding_dim must be positive");
  }

  bool operator==(const E2EConfig &o) const = default;
};

/// Five frame layers sized for CPU training on d-dimensional features.
inline E2EConfig desk_config(Eigen::Index feature_dim = 20) {
  E2EConfig c;
  c.layers = {{feature_dim, 32, {-2, -1, 0, 1, 2}},
              {32, 32, {-2, 0, 2}},
              {32, 32, {-3, 0, 3}},
              {32, 32, {0}},
              {32, 64, {0}}};
  c.embedding_dim = 32;
  return c;
}

/// A model small enough for exhaustive finite-difference checks.
inline E2EConfig tiny_config(Eigen::Index feature_dim = 3) {
  E2EConfig c;
  c.layers = {{feature_dim, 5, {-1, 0, 1}}, {5, 4, {0}}};
  c.embedding_dim = 4;
  return c;
}

/// Nine frame layers in the layout of the extended x-vector TDNN: 30-dim
/// MFCC input, 512-dim hidden layers alternating wide-context and 1x1
/// layers, 1500-dim last frame layer, 512-dim embedding.
inline E2EConfig paper_shape_config() {
  E2EConfig c;
  c.layers = {{30, 512, {-2, -1, 0, 1, 2}}, {512, 512, {0}}, {512, 512, {-2, 0, 2}},
              {512, 512, {0}},              {512, 512, {-3, 0, 3}}, {512, 512, {0}},
              {512, 512, {-4, 0, 4}},       {512, 512, {0}}, {512, 1500, {0}}};
  c.embedding_dim = 512;
  return c;
}

// ---------------------------------------------------------------------------
// Extractor

struct Extractor {
  E2EConfig config;
  std::vector<nn::Tensor> w;  // per layer, k_out x (c * k_in)
  std::vector<nn::Tensor> b;
  nn::Tensor seg_w;  // embedding_dim x pooled_dim
  nn::Tensor seg_b;

  nn::ParamList params() {
    nn::ParamList p;
    for (size_t i = 0; i < w.size(); ++i) {
      p.emplace_back("tdnn" + std::to_string(i) + ".w", &w[i]);
      p.emplace_back("tdnn" + std::to_string(i) + ".b", &b[i]);
    }
    p.emplace_back("segment.w", &seg_w);
    p.emplace_back("segment.b", &seg_b);
    return p;
  }

  bool operator==(const Extractor &o) const = default;
};

/// He-normal frame layers, zero biases.
inline Extractor init_extractor(const E2EConfig &cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  Extractor ex;
  ex.config = cfg;
  for (const auto &l : cfg.layers) {
    const Eigen::Index fan_in = l.context() * l.k_in;
    nn::Tensor w({l.k_out, fan_in});
    nn::init_normal(w, std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
    ex.w.push_back(std::move(w));
    ex.b.emplace_back(std::vector<Eigen::Index>{l.k_out});
  }
  ex.seg_w = nn::Tensor({cfg.embedding_dim, cfg.pooled_dim()});
  nn::init_normal(ex.seg_w, std::sqrt(1.0 / static_cast<double>(cfg.pooled_dim())), rng);
  ex.seg_b = nn::Tensor({cfg.embedding_dim});
  return ex;
}

struct ExtractCache {
  std::vector<Matrix> inputs;  // input of each frame layer
  std::vector<nn::TdnnCache> tdnn;
  Matrix last;  // output of the last frame layer
  nn::PoolCache pool;
  Vector pooled;
};

inline Vector extract_embedding(const Extractor &ex, const Eigen::Ref<const Matrix> &features,
                                ExtractCache *cache = nullptr) {
  const E2EConfig &cfg = ex.config;
  if (features.cols() != cfg.feature_dim())
    throw DimensionError("features have dimension " + std::to_string(features.cols()) + ", model expects " +
                         std::to_string(cfg.feature_dim()));
  if (features.rows() < cfg.min_frames())
    throw LengthError("utterance has " + std::to_string(features.rows()) + " frames, model needs at least " +
                      std::to_string(cfg.min_frames()));
  Matrix h = features;
  if (cache) {
    cache->inputs.clear();
    cache->tdnn.assign(cfg.layers.size(), {});
  }
  for (size_t i = 0; i < cfg.layers.size(); ++i) {
    Matrix next = nn::tdnn_forward(h, cfg.layers[i].offsets, ex.w[i], ex.b[i], cache ? &cache->tdnn[i] : nullptr);
    if (cache) cache->inputs.push_back(std::move(h));
    h = std::move(next);
  }
  Vector pooled = nn::stats_pool_forward(h, cfg.pooling, cache ? &cache->pool : nullptr);
  Vector emb = ex.seg_w.matrix() * pooled + ex.seg_b.vector();
  if (cache) {
    cache->last = std::move(h);
    cache->pooled = std::move(pooled);
  }
  return emb;
}

/// Accumulates parameter grads for dL/d(embedding). Frame layers below
/// `first_trained` receive no gradient.
inline void extract_backward(Extractor &ex, const ExtractCache &cache, const Eigen::Ref<const Vector> &d_emb,
                             size_t first_trained = 0) {
  const E2EConfig &cfg = ex.config;
  ex.seg_w.grad_matrix() += d_emb * cache.pooled.transpose();
  ex.seg_b.grad_vector() += d_emb;
  const Vector d_pooled = ex.seg_w.matrix().transpose() * d_emb;
  if (first_trained >= cfg.layers.size()) return;
  Matrix dh = nn::stats_pool_backward(cache.pool, cfg.pooling, cache.last, d_pooled);
  for (size_t i = cfg.layers.size(); i-- > first_trained;) {
    dh = nn::tdnn_backward(cache.tdnn[i], cfg.layers[i].offsets, cache.inputs[i].rows(), ex.w[i], ex.b[i], dh);
  }
}

/// An embedding set with the labels of `utts`, one vector per utterance.
inline UtteranceSet extract_embeddings(const Extractor &ex, const UtteranceSet &utts) {
  UtteranceSet out;
  for (const Utterance &u : utts) {
    Utterance e = u;
    e.payload = Embedding{extract_embedding(ex, u.features())};
    out.add(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full model

struct E2EModel {
  Extractor extractor;
  nplda::NpldaParams head;

  nn::ParamList params() {
    nn::ParamList p = extractor.params();
    for (auto &[name, t] : head.params()) p.emplace_back("head." + name, t);
    return p;
  }

  bool operator==(const E2EModel &o) const = default;
};

inline E2EModel make_model(Extractor ex, nplda::NpldaParams head) {
  if (head.input_dim() != ex.config.embedding_dim)
    throw DimensionError("nplda head expects " + std::to_string(head.input_dim()) + "-dim input, extractor emits " +
                         std::to_string(ex.config.embedding_dim));
  return {std::move(ex), std::move(head)};
}

/// A head shaped like a PLDA scorer: random projection to `dim`, identity
/// transform, positive cross term and negative self term.
inline nplda::NpldaParams random_head(Eigen::Index input_dim, Eigen::Index dim, std::uint64_t seed,
                                      bool length_norm = true) {
  std::mt19937_64 rng(seed);
  nplda::NpldaParams n;
  n.length_norm = length_norm;
  n.w1 = nn::Tensor({dim, input_dim});
  nn::init_normal(n.w1, std::sqrt(1.0 / static_cast<double>(input_dim)), rng);
  n.b1 = nn::Tensor({dim});
  n.w2 = nn::Tensor::from_matrix(Matrix::Identity(dim, dim));
  n.b2 = nn::Tensor({dim});
  n.p = nn::Tensor({dim}, 1.0);
  n.q = nn::Tensor({dim}, -0.5);
  n.k = nn::Tensor::scalar(0.0);
  n.theta = nn::Tensor::scalar(0.0);
  return n;
}

inline E2EModel init_random(const E2EConfig &cfg, Eigen::Index head_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Extractor ex = init_extractor(cfg, rng());
  nplda::NpldaParams head = random_head(cfg.embedding_dim, head_dim, rng());
  return make_model(std::move(ex), std::move(head));
}

/// Scores the trials, embedding every distinct utterance once.
inline ScoredTrialSet score_trials(const E2EModel &m, const std::vector<Trial> &trials, const UtteranceSet &utts) {
  check_trials_resolve(trials, utts);
  nplda::PairBatch b = nplda::index_trials(trials);
  Matrix emb(static_cast<Eigen::Index>(b.ids.size()), m.extractor.config.embedding_dim);
  for (size_t i = 0; i < b.ids.size(); ++i)
    emb.row(static_cast<Eigen::Index>(i)) = extract_embedding(m.extractor, utts.at(b.ids[i]).features()).transpose();
  Vector s = nplda::pair_scores(m.head, nplda::head_forward(m.head, emb), b.pairs);
  ScoredTrialSet out;
  out.reserve(trials.size());
  for (size_t i = 0; i < trials.size(); ++i) out.push_back({trials[i], s[static_cast<Eigen::Index>(i)]});
  return out;
}

inline ScoredTrialSet score_trial_batch(const E2EModel &m, const sampling::TrialBatch &batch,
                                        const UtteranceSet &utts) {
  return score_trials(m, batch.trials, utts);
}

/// Soft-DCF loss of one batch; with `backward`, accumulates the gradients
/// of every parameter (theta included).
inline double batch_loss(E2EModel &m, const std::vector<Trial> &trials, const UtteranceSet &utts,
                         const nplda::LossConfig &loss_cfg, bool backward, size_t first_trained = 0) {
  nplda::PairBatch b = nplda::index_trials(trials);
  if (b.labels.size() != trials.size()) throw ArgumentError("training trials must be labeled");
  const auto n = static_cast<Eigen::Index>(b.ids.size());
  std::vector<ExtractCache> caches(backward ? b.ids.size() : 0);
  Matrix emb(n, m.extractor.config.embedding_dim);
  for (Eigen::Index i = 0; i < n; ++i)
    emb.row(i) = extract_embedding(m.extractor, utts.at(b.ids[static_cast<size_t>(i)]).features(),
                                   backward ? &caches[static_cast<size_t>(i)] : nullptr)
                     .transpose();
  nplda::HeadCache hc = nplda::head_forward(m.head, emb);
  Vector s = nplda::pair_scores(m.head, hc, b.pairs);
  nplda::LossResult lr = nplda::soft_dcf_loss(s, b.labels, m.head.theta.value(), loss_cfg);
  if (backward) {
    Matrix d_emb = nplda::head_backward(m.head, hc, b.pairs, lr.d_scores);
    m.head.theta.grad()[0] += lr.d_theta;
    for (Eigen::Index i = 0; i < n; ++i)
      extract_backward(m.extractor, caches[static_cast<size_t>(i)], d_emb.row(i).transpose(), first_trained);
  }
  return lr.loss;
}

struct E2ETrainConfig {
  nplda::TrainConfig train;
  size_t freeze_prefix = 0;  // frame layers kept fixed, counted from the input
};

inline nplda::TrainResult<E2EModel> train_e2e(E2EModel init, const nplda::BatchSource &source,
                                              const UtteranceSet &train_utts, const nplda::DevSet *dev,
                                              const E2ETrainConfig &cfg) {
  if (cfg.freeze_prefix > init.extractor.config.layers.size())
    throw ArgumentError("freeze_prefix exceeds the number of frame layers");
  std::vector<std::string> frozen;
  for (size_t i = 0; i < cfg.freeze_prefix; ++i) {
    frozen.push_back("tdnn" + std::to_string(i) + ".w");
    frozen.push_back("tdnn" + std::to_string(i) + ".b");
  }
  std::vector<sampling::TrialBatch> batches;
  auto prepare = [&](int epoch) {
    batches = source(epoch);
    for (const auto &tb : batches) check_trials_resolve(tb.trials, train_utts);
    return batches.size();
  };
  auto step = [&](E2EModel &m, size_t b, bool backward) {
    return batch_loss(m, batches[b].trials, train_utts, cfg.train.loss, backward, cfg.freeze_prefix);
  };
  auto eval = [&](const E2EModel &m) -> std::optional<metrics::EvalReport> {
    if (!dev || !dev->utts) return std::nullopt;
    return metrics::evaluate(score_trials(m, dev->trials, *dev->utts), cfg.train.loss.weights);
  };
  return nplda::train_loop(std::move(init), prepare, step, eval, cfg.train, frozen);
}

inline nplda::TrainResult<E2EModel> train_e2e(E2EModel init, const std::vector<sampling::TrialBatch> &batches,
                                              const UtteranceSet &train_utts, const nplda::DevSet *dev,
                                              const E2ETrainConfig &cfg) {
  return train_e2e(std::move(init), nplda::fixed_batches(batches), train_utts, dev, cfg);
}

// ---------------------------------------------------------------------------
// Activation memory: 2 N T sum_i k_i c_i values of 16 bytes for a batch of N
// trials (2N utterances) of T frames.

struct MemoryEstimate {
  std::uint64_t bytes = 0;
  std::vector<std::uint64_t> per_layer;
};

inline MemoryEstimate estimate_memory(std::uint64_t n_trials, std::uint64_t frames, const E2EConfig &cfg) {
  if (cfg.layers.empty()) throw ArgumentError("memory estimate needs at least one layer");
  MemoryEstimate m;
  for (const auto &l : cfg.layers) {
    const std::uint64_t b = 2 * n_trials * frames * static_cast<std::uint64_t>(l.k_in) *
                            static_cast<std::uint64_t>(l.context()) * 16;
    m.per_layer.push_back(b);
    m.bytes += b;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Persistence

inline void put_extractor(Container &c, Extractor ex) {
  const E2EConfig &cfg = ex.config;
  c.set_meta("pooling", nn::pooling_name(cfg.pooling));
  c.set_meta("embedding_dim", std::to_string(cfg.embedding_dim));
  c.set_meta("num_layers", std::to_string(cfg.layers.size()));
  for (size_t i = 0; i < cfg.layers.size(); ++i) c.set_meta("layer" + std::to_string(i), format_layer(cfg.layers[i]));
  for (auto &[name, t] : ex.params()) c.put(name, *t);
}

inline Extractor get_extractor(const Container &c) {
  E2EConfig cfg;
  cfg.pooling = nn::parse_pooling(c.meta("pooling"));
  size_t n_layers = 0;
  if (!parse_int(c.meta("embedding_dim"), &cfg.embedding_dim) || !parse_int(c.meta("num_layers"), &n_layers))
    throw ParseError("bad extractor metadata");
  for (size_t i = 0; i < n_layers; ++i) cfg.layers.push_back(parse_layer(c.meta("layer" + std::to_string(i))));
  cfg.validate();
  Extractor ex = init_extractor(cfg, 0);
  for (auto &[name, t] : ex.params()) {
    const nn::Tensor &stored = c.get(name);
    if (stored.shape() != t->shape()) throw ParseError("array " + name + " does not match the layer spec");
    *t = stored;
  }
  return ex;
}

inline Container to_container(const Extractor &ex) {
  Container c;
  c.set_meta("kind", "extractor");
  put_extractor(c, ex);
  return c;
}

inline Container to_container(E2EModel m) {
  Container c;
  c.set_meta("kind", "e2e");
  c.set_meta("head_length_norm", m.head.length_norm ? "1" : "0");
  put_extractor(c, m.extractor);
  nplda::put_params(c, "head.", m.head);
  return c;
}

inline Extractor extractor_from_container(const Container &c) {
  if (!c.has_meta("kind") || (c.meta("kind") != "extractor" && c.meta("kind") != "e2e"))
    throw ParseError("not an extractor checkpoint");
  return get_extractor(c);
}

inline E2EModel from_container(const Container &c) {
  if (!c.has_meta("kind") || c.meta("kind") != "e2e") throw ParseError("not an e2e model");
  nplda::NpldaParams head;
  head.length_norm = c.meta("head_length_norm") == "1";
  nplda::get_params(c, "head.", head);
  return make_model(get_extractor(c), std::move(head));
}

}  // namespace spkv::e2e

#endif  // SPKV_E2E_HPP_
