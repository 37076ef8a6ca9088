// spkv/data.hpp

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

#ifndef SPKV_DATA_HPP_
#define SPKV_DATA_HPP_

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "spkv/common.hpp"

namespace spkv {

enum class Gender { kMale, kFemale };

inline char gender_code(Gender g) { return g == Gender::kMale ? 'M' : 'F'; }

inline std::optional<Gender> parse_gender(std::string_view s) {
  if (s == "M" || s == "m") return Gender::kMale;
  if (s == "F" || s == "f") return Gender::kFemale;
  return std::nullopt;
}

enum class Label { kTarget, kNontarget };

inline const char *label_name(Label l) {
  return l == Label::kTarget ? "target" : "nontarget";
}

/// Frame-level features, one row per frame.
struct FeatureMatrix {
  Matrix frames;  // T x d

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
  bool operator==(const FeatureMatrix &o) const {
    return frames.rows() == o.frames.rows() && frames.cols() == o.frames.cols() &&
           frames == o.frames;
  }
};

struct Embedding {
  Vector vector;

  bool operator==(const Embedding &o) const {
    return vector.size() == o.vector.size() && vector == o.vector;
  }
};

struct Utterance {
  std::string id;
  std::string speaker_id;
  Gender gender = Gender::kMale;
  std::string dataset_id;
  std::variant<FeatureMatrix, Embedding> payload;

  bool has_embedding() const { return std::holds_alternative<Embedding>(payload); }
  bool has_features() const { return std::holds_alternative<FeatureMatrix>(payload); }

  const Vector &embedding() const {
    if (!has_embedding()) throw StateError("utterance " + id + " carries features, not an embedding");
    return std::get<Embedding>(payload).vector;
  }
  const Matrix &features() const {
    if (!has_features()) throw StateError("utterance " + id + " carries an embedding, not features");
    return std::get<FeatureMatrix>(payload).frames;
  }

  /// Payload dimension: D for embeddings, d for features.
  Eigen::Index dim() const {
    return has_embedding() ? embedding().size() : features().cols();
  }

  bool operator==(const Utterance &o) const = default;
};

/// An ordered collection of utterances with unique ids and a common payload
/// kind and dimension.
class UtteranceSet {
 public:
  UtteranceSet() = default;

  void add(Utterance utt) {
    if (utt.id.empty()) throw ArgumentError("utterance id is empty");
    if (utt.speaker_id.empty()) throw ArgumentError("utterance " + utt.id + " has no speaker");
    if (utt.dataset_id.empty()) throw ArgumentError("utterance " + utt.id + " has no dataset id");
    if (index_.count(utt.id)) throw ArgumentError("duplicate utterance id " + utt.id);
    if (!utts_.empty()) {
      if (utt.has_embedding() != utts_.front().has_embedding())
        throw ArgumentError("utterance " + utt.id + " has a different payload kind");
      if (utt.dim() != dim_)
        throw DimensionError("utterance " + utt.id + " has dimension " +
                             std::to_string(utt.dim()) + ", expected " +
                             std::to_string(dim_));
    } else {
      dim_ = utt.dim();
    }
    if (utt.has_features() && utt.features().rows() < 1)
      throw LengthError("utterance " + utt.id + " has no frames");
    index_.emplace(utt.id, utts_.size());
    utts_.push_back(std::move(utt));
  }

  size_t size() const { return utts_.size(); }
  bool empty() const { return utts_.empty(); }
  /// -1 when empty.
  Eigen::Index dim() const { return utts_.empty() ? -1 : dim_; }
  bool has_embeddings() const { return !utts_.empty() && utts_.front().has_embedding(); }

  const Utterance &operator[](size_t i) const { return utts_[i]; }
  auto begin() const { return utts_.begin(); }
  auto end() const { return utts_.end(); }

  const Utterance *find(const std::string &id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &utts_[it->second];
  }
  const Utterance &at(const std::string &id) const {
    const Utterance *u = find(id);
    if (!u) throw LookupError("unknown utterance id " + id);
    return *u;
  }
  std::optional<size_t> index_of(const std::string &id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Utterance indices grouped by speaker, speakers in order of first
  /// appearance.
  std::vector<std::pair<std::string, std::vector<size_t>>> by_speaker() const {
    std::vector<std::pair<std::string, std::vector<size_t>>> out;
    std::unordered_map<std::string, size_t> pos;
    for (size_t i = 0; i < utts_.size(); ++i) {
      auto [it, inserted] = pos.emplace(utts_[i].speaker_id, out.size());
      if (inserted) out.push_back({utts_[i].speaker_id, {}});
      out[it->second].second.push_back(i);
    }
    return out;
  }

  bool operator==(const UtteranceSet &o) const { return utts_ == o.utts_; }

 private:
  std::vector<Utterance> utts_;
  std::unordered_map<std::string, size_t> index_;
  Eigen::Index dim_ = -1;
};

struct Trial {
  std::string enroll_id;
  std::string test_id;
  std::optional<Label> label;

  bool operator==(const Trial &o) const = default;
};

struct ScoredTrial {
  Trial trial;
  double score = 0.0;

  bool operator==(const ScoredTrial &o) const = default;
};

using ScoredTrialSet = std::vector<ScoredTrial>;

/// Checks that every trial id resolves in `utts`; throws LookupError listing
/// the missing ids.
inline void check_trials_resolve(const std::vector<Trial> &trials, const UtteranceSet &utts) {
  std::vector<std::string> missing;
  for (const Trial &t : trials) {
    if (!utts.find(t.enroll_id)) missing.push_back(t.enroll_id);
    if (!utts.find(t.test_id)) missing.push_back(t.test_id);
    if (missing.size() >= 10) break;
  }
  if (missing.empty()) return;
  std::string msg = "unresolved utterance ids:";
  for (const auto &m : missing) msg += " " + m;
  throw LookupError(msg);
}

// ---------------------------------------------------------------------------
// Chunking

/// Splits an utterance into consecutive non-overlapping chunks of `chunk_len`
/// frames. A trailing remainder is kept only if it has at least `min_keep`
/// frames.
inline std::vector<FeatureMatrix> chunk_utterance(const FeatureMatrix &f,
                                                  Eigen::Index chunk_len = 2000,
                                                  Eigen::Index min_keep = 500) {
  if (chunk_len < 1) throw ArgumentError("chunk_len must be positive");
  std::vector<FeatureMatrix> chunks;
  const Eigen::Index total = f.num_frames();
  for (Eigen::Index start = 0; start < total; start += chunk_len) {
    Eigen::Index len = std::min(chunk_len, total - start);
    if (len < chunk_len && len < min_keep) break;
    chunks.push_back({f.frames.middleRows(start, len)});
  }
  return chunks;
}

/// Chunks every utterance of a feature collection. Chunk k of utterance u is
/// named "u-k"; labels are inherited.
inline UtteranceSet chunk_utterances(const UtteranceSet &utts, Eigen::Index chunk_len = 2000,
                                     Eigen::Index min_keep = 500) {
  UtteranceSet out;
  for (const Utterance &u : utts) {
    auto chunks = chunk_utterance({u.features()}, chunk_len, min_keep);
    for (size_t k = 0; k < chunks.size(); ++k)
      out.add({u.id + "-" + std::to_string(k), u.speaker_id, u.gender, u.dataset_id,
               std::move(chunks[k])});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generators

struct SynthLabels {
  Gender gender = Gender::kMale;
  std::string dataset_id = "synth";
  std::string speaker_prefix = "spk";
};

inline std::string synth_speaker_name(const SynthLabels &labels, int s) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", s);
  return labels.dataset_id + "-" + gender_code(labels.gender) + "-" + labels.speaker_prefix + buf;
}

/// Draws embeddings from the linear-Gaussian speaker model
///   eta = phi * omega + eps,  omega ~ N(0, I_q) once per speaker,
///   eps ~ N(0, sigma) per utterance.
inline UtteranceSet synth_plda_embeddings(const Matrix &phi, const Matrix &sigma,
                                          int n_speakers, int utts_per_speaker,
                                          std::uint64_t seed,
                                          const SynthLabels &labels = {}) {
  const Eigen::Index dim = sigma.rows();
  if (sigma.cols() != dim || phi.rows() != dim)
    throw ShapeError("phi must be D x q and sigma D x D");
  if (phi.cols() > dim) throw ArgumentError("latent rank exceeds embedding dimension");
  if (!sigma.isApprox(sigma.transpose(), 1e-12))
    throw ModelError("residual covariance is not symmetric");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw ModelError("residual covariance is not positive definite");
  const Matrix chol = llt.matrixL();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto draw = [&](Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };

  UtteranceSet out;
  for (int s = 0; s < n_speakers; ++s) {
    const std::string spk = synth_speaker_name(labels, s);
    const Vector speaker_mean = phi * draw(phi.cols());
    for (int u = 0; u < utts_per_speaker; ++u) {
      Vector eta = speaker_mean + chol * draw(dim);
      out.add({spk + "-u" + std::to_string(u), spk, labels.gender, labels.dataset_id,
               Embedding{std::move(eta)}});
    }
  }
  return out;
}

struct FeatureSynthOptions {
  int utts_per_speaker = 1;
  // Per-utterance offset added to every frame (session variability).
  double session_std = 0.0;
  Gender gender = Gender::kMale;
  std::string dataset_id = "synth";
};

/// Frame t of an utterance of speaker s is mean_s + session offset +
/// N(0, within_std^2 I), i.i.d. over frames.
inline UtteranceSet synth_features(const std::map<std::string, Vector> &speaker_means,
                                   double within_std, Eigen::Index num_frames,
                                   std::uint64_t seed,
                                   const FeatureSynthOptions &opts = {}) {
  if (speaker_means.empty()) throw ArgumentError("speaker map is empty");
  if (within_std < 0 || opts.session_std < 0) throw ArgumentError("standard deviations must be >= 0");
  if (num_frames < 1) throw ArgumentError("num_frames must be positive");
  const Eigen::Index dim = speaker_means.begin()->second.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  UtteranceSet out;
  for (const auto &[spk, mean] : speaker_means) {
    if (mean.size() != dim) throw DimensionError("speaker " + spk + " mean has wrong dimension");
    for (int u = 0; u < opts.utts_per_speaker; ++u) {
      Vector offset = mean;
      if (opts.session_std > 0)
        for (Eigen::Index j = 0; j < dim; ++j) offset[j] += opts.session_std * normal(rng);
      Matrix frames(num_frames, dim);
      for (Eigen::Index t = 0; t < num_frames; ++t)
        for (Eigen::Index j = 0; j < dim; ++j)
          frames(t, j) = offset[j] + within_std * normal(rng);
      out.add({spk + "-u" + std::to_string(u), spk, opts.gender, opts.dataset_id,
               FeatureMatrix{std::move(frames)}});
    }
  }
  return out;
}

/// Speaker means drawn i.i.d. N(0, spread^2 I), keyed by synthetic speaker
/// names.
inline std::map<std::string, Vector> synth_speaker_means(int n_speakers, Eigen::Index dim,
                                                         double spread, std::uint64_t seed,
                                                         const SynthLabels &labels = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::map<std::string, Vector> means;
  for (int s = 0; s < n_speakers; ++s) {
    Vector m(dim);
    for (Eigen::Index j = 0; j < dim; ++j) m[j] = spread * normal(rng);
    means.emplace(synth_speaker_name(labels, s), std::move(m));
  }
  return means;
}

/// Concatenates collections; ids must stay unique.
inline UtteranceSet merge(const std::vector<const UtteranceSet *> &parts) {
  UtteranceSet out;
  for (const UtteranceSet *p : parts)
    for (const Utterance &u : *p) out.add(u);
  return out;
}

}  // namespace spkv

#endif  // SPKV_DATA_HPP_
