// spkv/benchmark.hpp

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

// Synthetic benchmarks.
//
// Embedding benchmark: two domains drawn from the linear-Gaussian speaker
// model with a shared speaker subspace. The out-of-domain set (domain "ood")
// has isotropic residual noise; the in-domain sets (domain "ind": train and
// dev, disjoint speakers) add a low-rank nuisance component to the residual
// covariance. GPLDA is trained out of domain, NPLDA adapts in domain.
//
// Feature benchmark: frame sequences around per-speaker means with a
// per-utterance session offset and i.i.d. frame noise.

#ifndef SPKV_BENCHMARK_HPP_
#define SPKV_BENCHMARK_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include "spkv/config.hpp"
#include "spkv/data.hpp"
#include "spkv/sampling.hpp"

namespace spkv::benchmark {

struct EmbeddingConfig {
  int dim = 20;
  int rank = 10;
  double phi_scale = 1.0;
  double within_var = 0.5;
  int nuisance_rank = 5;
  double nuisance_var = 4.0;
  int ood_speakers = 1000;
  int ood_utts_per_speaker = 10;
  int speakers = 300;
  int utts_per_speaker = 8;
  int dev_speakers = 200;
  int dev_utts_per_speaker = 8;
  size_t dev_targets = 3000;
  size_t dev_nontargets = 30000;
};

struct EmbeddingBenchmark {
  Matrix phi;
  Matrix ood_sigma;
  Matrix sigma;
  UtteranceSet ood_train;  // GPLDA training data
  UtteranceSet train;      // NPLDA training data
  UtteranceSet dev;
  std::vector<Trial> dev_trials;
};

inline EmbeddingBenchmark make_embedding_benchmark(const EmbeddingConfig &c, std::uint64_t seed) {
  if (c.rank < 1 || c.rank > c.dim || c.nuisance_rank < 0) throw ConfigError("bad benchmark ranks");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  EmbeddingBenchmark b;
  b.phi.resize(c.dim, c.rank);
  for (Eigen::Index i = 0; i < b.phi.size(); ++i) b.phi.data()[i] = c.phi_scale * normal(rng);
  b.ood_sigma = c.within_var * Matrix::Identity(c.dim, c.dim);
  Matrix u(c.dim, c.nuisance_rank);
  for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = normal(rng);
  b.sigma = b.ood_sigma + (c.nuisance_var / c.dim) * u * u.transpose();
  b.ood_train = synth_plda_embeddings(b.phi, b.ood_sigma, c.ood_speakers, c.ood_utts_per_speaker, rng(),
                                      {Gender::kMale, "ood", "spk"});
  b.train = synth_plda_embeddings(b.phi, b.sigma, c.speakers, c.utts_per_speaker, rng(),
                                  {Gender::kMale, "ind", "spk"});
  b.dev = synth_plda_embeddings(b.phi, b.sigma, c.dev_speakers, c.dev_utts_per_speaker, rng(),
                                {Gender::kMale, "ind", "dev"});
  b.dev_trials = sampling::sample_eval_trials(b.dev, c.dev_targets, c.dev_nontargets, rng());
  return b;
}

struct FeatureConfig {
  int feature_dim = 20;
  int frames = 100;
  double spread = 1.0;
  double within_std = 1.0;
  double session_std = 0.15;
  int speakers = 1000;
  int utts_per_speaker = 8;
  int dev_speakers = 100;
  int dev_utts_per_speaker = 8;
  size_t dev_targets = 2000;
  size_t dev_nontargets = 20000;
};

struct FeatureBenchmark {
  UtteranceSet train;
  UtteranceSet dev;
  std::vector<Trial> dev_trials;
};

inline FeatureBenchmark make_feature_benchmark(const FeatureConfig &c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeatureBenchmark b;
  FeatureSynthOptions o;
  o.session_std = c.session_std;
  o.dataset_id = "feat";
  o.utts_per_speaker = c.utts_per_speaker;
  auto train_means = synth_speaker_means(c.speakers, c.feature_dim, c.spread, rng(), {Gender::kMale, "feat", "spk"});
  b.train = synth_features(train_means, c.within_std, c.frames, rng(), o);
  o.utts_per_speaker = c.dev_utts_per_speaker;
  auto dev_means = synth_speaker_means(c.dev_speakers, c.feature_dim, c.spread, rng(), {Gender::kMale, "feat", "dev"});
  b.dev = synth_features(dev_means, c.within_std, c.frames, rng(), o);
  b.dev_trials = sampling::sample_eval_trials(b.dev, c.dev_targets, c.dev_nontargets, rng());
  return b;
}

// ---------------------------------------------------------------------------
// Config views of the [simulate] section

inline EmbeddingConfig embedding_config(const Config &cfg) {
  EmbeddingConfig c;
  c.dim = cfg.get_int<int>("simulate", "dim", c.dim);
  c.rank = cfg.get_int<int>("simulate", "rank", c.rank);
  c.phi_scale = cfg.get_double("simulate", "phi_scale", c.phi_scale);
  c.within_var = cfg.get_double("simulate", "within_var", c.within_var);
  c.nuisance_rank = cfg.get_int<int>("simulate", "nuisance_rank", c.nuisance_rank);
  c.nuisance_var = cfg.get_double("simulate", "nuisance_var", c.nuisance_var);
  c.ood_speakers = cfg.get_int<int>("simulate", "domain_speakers", c.ood_speakers);
  c.ood_utts_per_speaker = cfg.get_int<int>("simulate", "domain_utts_per_speaker", c.ood_utts_per_speaker);
  c.speakers = cfg.get_int<int>("simulate", "speakers", c.speakers);
  c.utts_per_speaker = cfg.get_int<int>("simulate", "utts_per_speaker", c.utts_per_speaker);
  c.dev_speakers = cfg.get_int<int>("simulate", "dev_speakers", c.dev_speakers);
  c.dev_utts_per_speaker = cfg.get_int<int>("simulate", "dev_utts_per_speaker", c.dev_utts_per_speaker);
  c.dev_targets = cfg.get_int<size_t>("simulate", "dev_targets", c.dev_targets);
  c.dev_nontargets = cfg.get_int<size_t>("simulate", "dev_nontargets", c.dev_nontargets);
  return c;
}

inline FeatureConfig feature_config(const Config &cfg) {
  FeatureConfig c;
  c.feature_dim = cfg.get_int<int>("simulate", "feature_dim", c.feature_dim);
  c.frames = cfg.get_int<int>("simulate", "frames", c.frames);
  c.spread = cfg.get_double("simulate", "spread", c.spread);
  c.within_std = cfg.get_double("simulate", "within_std", c.within_std);
  c.session_std = cfg.get_double("simulate", "session_std", c.session_std);
  c.speakers = cfg.get_int<int>("simulate", "speakers", c.speakers);
  c.utts_per_speaker = cfg.get_int<int>("simulate", "utts_per_speaker", c.utts_per_speaker);
  c.dev_speakers = cfg.get_int<int>("simulate", "dev_speakers", c.dev_speakers);
  c.dev_utts_per_speaker = cfg.get_int<int>("simulate", "dev_utts_per_speaker", c.dev_utts_per_speaker);
  c.dev_targets = cfg.get_int<size_t>("simulate", "dev_targets", c.dev_targets);
  c.dev_nontargets = cfg.get_int<size_t>("simulate", "dev_nontargets", c.dev_nontargets);
  return c;
}

}  // namespace spkv::benchmark

#endif  // SPKV_BENCHMARK_HPP_
