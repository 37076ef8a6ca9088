// spkv/config.hpp

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

// Experiment configuration: an INI-style text file
//
//   # comment
//   [section]
//   key = value
//
// A key may repeat only where a list is expected (the `layer` lines of
// [e2e]); elsewhere the last value wins. Overrides of the form
// "section.key=value" replace every value of that key.

#ifndef SPKV_CONFIG_HPP_
#define SPKV_CONFIG_HPP_

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spkv/e2e.hpp"
#include "spkv/gplda.hpp"
#include "spkv/metrics.hpp"
#include "spkv/nplda.hpp"
#include "spkv/sampling.hpp"

namespace spkv {

class Config {
 public:
  static Config parse(std::istream &is, const std::string &what = "<config>") {
    Config c;
    std::string line, section;
    size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#' || line[first] == ';') continue;
      const auto last = line.find_last_not_of(" \t\r");
      std::string body = line.substr(first, last - first + 1);
      if (body.front() == '[') {
        if (body.back() != ']' || body.size() < 3)
          throw ConfigError(what + ":" + std::to_string(line_no) + ": bad section header");
        section = trim(body.substr(1, body.size() - 2));
        c.sections_.insert(section);
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos || section.empty())
        throw ConfigError(what + ":" + std::to_string(line_no) + ": expected 'key = value' inside a section");
      const std::string key = trim(body.substr(0, eq));
      if (key.empty()) throw ConfigError(what + ":" + std::to_string(line_no) + ": empty key");
      c.add(section, key, trim(body.substr(eq + 1)));
    }
    return c;
  }

  static Config parse_string(const std::string &text) {
    std::istringstream is(text);
    return parse(is);
  }

  static Config load(const std::string &path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path);
    return parse(is, path);
  }

  void add(const std::string &section, const std::string &key, const std::string &value) {
    sections_.insert(section);
    entries_.push_back({section, key, value});
  }

  void set(const std::string &section, const std::string &key, const std::string &value) {
    std::erase_if(entries_, [&](const Entry &e) { return e.section == section && e.key == key; });
    add(section, key, value);
  }

  /// "section.key=value"
  void apply_override(const std::string &text) {
    const auto eq = text.find('=');
    const auto dot = text.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("override '" + text + "' is not of the form section.key=value");
    set(trim(text.substr(0, dot)), trim(text.substr(dot + 1, eq - dot - 1)), trim(text.substr(eq + 1)));
  }

  bool has(const std::string &section, const std::string &key) const {
    for (const auto &e : entries_)
      if (e.section == section && e.key == key) return true;
    return false;
  }

  std::vector<std::string> get_all(const std::string &section, const std::string &key) const {
    std::vector<std::string> out;
    for (const auto &e : entries_)
      if (e.section == section && e.key == key) out.push_back(e.value);
    return out;
  }

  std::optional<std::string> get(const std::string &section, const std::string &key) const {
    auto all = get_all(section, key);
    if (all.empty()) return std::nullopt;
    return all.back();
  }

  std::string get_string(const std::string &section, const std::string &key, const std::string &def) const {
    return get(section, key).value_or(def);
  }

  std::string require(const std::string &section, const std::string &key) const {
    auto v = get(section, key);
    if (!v) throw ConfigError("missing required setting " + section + "." + key);
    return *v;
  }

  double get_double(const std::string &section, const std::string &key, double def) const {
    auto v = get(section, key);
    if (!v) return def;
    double out = 0.0;
    if (!parse_double(*v, &out)) throw ConfigError(section + "." + key + ": '" + *v + "' is not a number");
    return out;
  }

  template <class Int>
  Int get_int(const std::string &section, const std::string &key, Int def) const {
    auto v = get(section, key);
    if (!v) return def;
    Int out{};
    if (!parse_int(*v, &out)) throw ConfigError(section + "." + key + ": '" + *v + "' is not an integer");
    return out;
  }

  bool get_bool(const std::string &section, const std::string &key, bool def) const {
    auto v = get(section, key);
    if (!v) return def;
    if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
    if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
    throw ConfigError(section + "." + key + ": '" + *v + "' is not a boolean");
  }

  /// Rejects keys outside `known` (section -> keys) to catch typos.
  void check_known(const std::map<std::string, std::set<std::string>> &known) const {
    for (const auto &e : entries_) {
      auto it = known.find(e.section);
      if (it == known.end()) throw ConfigError("unknown config section [" + e.section + "]");
      if (!it->second.count(e.key)) throw ConfigError("unknown config key " + e.section + "." + e.key);
    }
  }

  /// Sections sorted by name, entries in insertion order.
  void write(std::ostream &os) const {
    bool first = true;
    for (const auto &s : sections_) {
      if (!first) os << '\n';
      first = false;
      os << '[' << s << "]\n";
      for (const auto &e : entries_)
        if (e.section == s) os << e.key << " = " << e.value << '\n';
    }
  }

  void write(const std::string &path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    write(os);
    if (!os) throw IoError("write to " + path + " failed");
  }

 private:
  struct Entry {
    std::string section, key, value;
  };

  static std::string trim(const std::string &s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::set<std::string> sections_;
  std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Typed views

inline const std::map<std::string, std::set<std::string>> &config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"data", {"train", "dev", "dev_trials", "gplda_train", "out_dir"}},
      {"simulate",
       {"kind", "dim", "rank", "phi_scale", "within_var", "nuisance_var", "nuisance_rank", "speakers",
        "utts_per_speaker", "dev_speakers", "dev_utts_per_speaker", "domain_speakers",
        "domain_utts_per_speaker", "feature_dim", "frames", "spread", "within_std", "session_std",
        "dev_targets", "dev_nontargets"}},
      {"sampler", {"algo", "utts_per_batch", "m_min", "m_max", "trials_per_batch", "target_ratio",
                   "batches_per_partition", "trials", "resample"}},
      {"loss", {"alpha"}},
      {"optimizer", {"lr", "beta1", "beta2", "eps", "patience"}},
      {"metrics", {"c_miss", "c_fa", "p_target"}},
      {"gplda", {"lda_dim", "length_norm", "latent_dim", "iterations", "average_per_speaker"}},
      {"nplda", {"epochs", "lr", "alpha", "learn_theta", "patience"}},
      {"e2e", {"preset", "layer", "pooling", "embedding_dim", "head_dim", "epochs", "lr", "freeze_prefix",
               "alpha", "learn_theta", "extractor_seed", "patience"}},
  };
  return schema;
}

inline metrics::DcfWeights dcf_weights(const Config &c) {
  metrics::DcfWeights w;
  w.c_miss = c.get_double("metrics", "c_miss", w.c_miss);
  w.c_fa = c.get_double("metrics", "c_fa", w.c_fa);
  w.p_target = c.get_double("metrics", "p_target", w.p_target);
  w.beta();  // validates
  return w;
}

inline sampling::SamplerConfig sampler_config(const Config &c, std::uint64_t seed) {
  sampling::SamplerConfig s;
  s.utts_per_batch = c.get_int<int>("sampler", "utts_per_batch", s.utts_per_batch);
  s.m_min = c.get_int<int>("sampler", "m_min", s.m_min);
  s.m_max = c.get_int<int>("sampler", "m_max", s.m_max);
  s.trials_per_batch = c.get_int<int>("sampler", "trials_per_batch", s.trials_per_batch);
  s.target_ratio = c.get_double("sampler", "target_ratio", s.target_ratio);
  s.batches_per_partition = c.get_int<int>("sampler", "batches_per_partition", s.batches_per_partition);
  s.seed = seed;
  s.validate();
  return s;
}

inline gplda::GpldaConfig gplda_config(const Config &c) {
  gplda::GpldaConfig g;
  g.lda_dim = c.get_int<int>("gplda", "lda_dim", g.lda_dim);
  g.length_norm = c.get_bool("gplda", "length_norm", g.length_norm);
  g.em.latent_dim = c.get_int<int>("gplda", "latent_dim", g.em.latent_dim);
  g.em.iterations = c.get_int<int>("gplda", "iterations", g.em.iterations);
  g.em.average_per_speaker = c.get_bool("gplda", "average_per_speaker", g.em.average_per_speaker);
  return g;
}

/// Training settings for `stage` ("nplda" or "e2e"); the stage section's
/// `lr`, `alpha` and `patience` override the [optimizer] and [loss] values.
inline nplda::TrainConfig train_config(const Config &c, const std::string &stage, std::uint64_t seed) {
  nplda::TrainConfig t;
  t.epochs = c.get_int<int>(stage, "epochs", t.epochs);
  t.adam.lr = c.get_double("optimizer", "lr", t.adam.lr);
  t.adam.lr = c.get_double(stage, "lr", t.adam.lr);
  t.adam.beta1 = c.get_double("optimizer", "beta1", t.adam.beta1);
  t.adam.beta2 = c.get_double("optimizer", "beta2", t.adam.beta2);
  t.adam.eps = c.get_double("optimizer", "eps", t.adam.eps);
  t.patience = c.get_int<int>("optimizer", "patience", t.patience);
  t.patience = c.get_int<int>(stage, "patience", t.patience);
  t.loss.alpha = c.get_double("loss", "alpha", t.loss.alpha);
  t.loss.alpha = c.get_double(stage, "alpha", t.loss.alpha);
  t.loss.weights = dcf_weights(c);
  t.learn_theta = c.get_bool(stage, "learn_theta", t.learn_theta);
  t.seed = seed;
  return t;
}

/// [e2e] preset = desk | tiny | paper-shape, optionally replaced by explicit
/// `layer` lines.
inline e2e::E2EConfig e2e_config(const Config &c, Eigen::Index feature_dim = 20) {
  const std::string preset = c.get_string("e2e", "preset", "desk");
  e2e::E2EConfig cfg;
  if (preset == "desk") cfg = e2e::desk_config(feature_dim);
  else if (preset == "tiny") cfg = e2e::tiny_config(feature_dim);
  else if (preset == "paper-shape") cfg = e2e::paper_shape_config();
  else throw ConfigError("unknown e2e preset '" + preset + "' (desk|tiny|paper-shape)");
  auto layers = c.get_all("e2e", "layer");
  if (!layers.empty()) {
    cfg.layers.clear();
    for (const auto &l : layers) cfg.layers.push_back(e2e::parse_layer(l));
  }
  if (auto p = c.get("e2e", "pooling")) cfg.pooling = nn::parse_pooling(*p);
  cfg.embedding_dim = c.get_int<Eigen::Index>("e2e", "embedding_dim", cfg.embedding_dim);
  cfg.validate();
  return cfg;
}

/// Seed of the training batches of `epoch`; epoch 0 (the initial
/// evaluation pass) shares the batches of epoch 1.
inline std::uint64_t epoch_seed(std::uint64_t seed, int epoch, bool resample) {
  if (!resample) return seed;
  return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(std::max(epoch, 1)));
}

/// Batches per epoch from [sampler]: algo = 2 (speaker blocks, default) or 1
/// (pairwise, `trials` per epoch, default a quarter of the utterance count);
/// resample = true draws fresh batches every epoch.
inline nplda::BatchSource batch_source(const Config &c, const UtteranceSet &utts, std::uint64_t seed) {
  const int algo = c.get_int<int>("sampler", "algo", 2);
  if (algo != 1 && algo != 2) throw ConfigError("sampler.algo must be 1 or 2");
  const bool resample = c.get_bool("sampler", "resample", true);
  const sampling::SamplerConfig sc = sampler_config(c, seed);
  const size_t n_trials = c.get_int<size_t>("sampler", "trials", utts.size() / 4);
  return [algo, resample, sc, n_trials, seed, &utts](int epoch) {
    const std::uint64_t s = epoch_seed(seed, epoch, resample);
    if (algo == 1)
      return sampling::sample_trials_algo1(utts, n_trials, sc.target_ratio,
                                           static_cast<size_t>(sc.trials_per_batch), s);
    sampling::SamplerConfig e = sc;
    e.seed = s;
    return sampling::sample_algo2_epoch(utts, e);
  };
}

}  // namespace spkv

#endif  // SPKV_CONFIG_HPP_
