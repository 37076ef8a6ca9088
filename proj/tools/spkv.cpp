// tools/spkv.cpp

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

// Command-line experiment runner.
//
//   spkv simulate      --config C --seed S --out DIR
//   spkv train gplda   --data F [--extractor X] [--dev F --dev-trials K] --out M
//   spkv train nplda   --init G --data F [...] --seed S --out M
//   spkv train e2e     [--extractor X] [--init N] --data F [...] --seed S --out M
//   spkv score         --model M --trials T --data F [--extractor X] --out SCORES
//   spkv evaluate      --scores SCORES --key K [--csv OUT]
//   spkv sample        --data F --seed S --out BATCHES
//   spkv estimate-mem  [--preset P] --trials N --frames T
//
// Exit status: 0 on success, 1 on invalid input, 2 on internal errors.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spkv/benchmark.hpp"
#include "spkv/config.hpp"
#include "spkv/container.hpp"
#include "spkv/data_io.hpp"
#include "spkv/e2e.hpp"
#include "spkv/gplda.hpp"
#include "spkv/metrics.hpp"
#include "spkv/nplda.hpp"
#include "spkv/sampling.hpp"

namespace fs = std::filesystem;
using namespace spkv;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App *cmd, Common &c, bool with_seed) {
  cmd->add_option("--config", c.config_path, "experiment config file");
  cmd->add_option("--set", c.overrides, "override a setting: section.key=value");
  if (with_seed) cmd->add_option("--seed", c.seed, "random seed");
}

Config load_config(const Common &c) {
  Config cfg = c.config_path.empty() ? Config() : Config::load(c.config_path);
  for (const auto &o : c.overrides) cfg.apply_override(o);
  cfg.check_known(config_schema());
  return cfg;
}

std::uint64_t require_seed(const Common &c) {
  if (!c.seed) throw ConfigError("--seed is required");
  return *c.seed;
}

/// Path from a flag, else from [data] `key`, else empty.
std::string data_path(const std::string &flag, const Config &cfg, const std::string &key) {
  return flag.empty() ? cfg.get_string("data", key, "") : flag;
}

void write_resolved(const Config &cfg, const std::string &out, std::optional<std::uint64_t> seed) {
  Config r = cfg;
  if (seed) r.set("run", "seed", std::to_string(*seed));
  r.write(out + ".config");
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void print_table(const std::string &model, const std::string &pooling, const std::string &init,
                 const metrics::EvalReport &r) {
  std::printf("%-8s %-9s %-12s %8s %7s\n", "model", "pooling", "init", "EER(%)", "C_Min");
  std::printf("%-8s %-9s %-12s %8s %7s\n", model.c_str(), pooling.c_str(), init.c_str(),
              fixed(100.0 * r.eer, 2).c_str(), fixed(r.min_dcf, 3).c_str());
}

std::string kind_of(const Container &c) { return c.has_meta("kind") ? c.meta("kind") : ""; }

/// Embeddings for a backend: the file itself, or its features passed
/// through an extractor.
UtteranceSet backend_input(const std::string &path, const std::string &extractor_path) {
  UtteranceSet utts = read_utterances(path);
  if (extractor_path.empty()) {
    if (!utts.has_embeddings()) throw ArgumentError(path + " holds features; pass --extractor");
    return utts;
  }
  e2e::Extractor ex = e2e::extractor_from_container(Container::read(extractor_path));
  return e2e::extract_embeddings(ex, utts);
}

struct DevInput {
  UtteranceSet utts;
  std::vector<Trial> trials;
  bool present = false;
};

DevInput load_dev(const std::string &dev, const std::string &trials, const std::string &extractor,
                  bool features) {
  DevInput d;
  if (dev.empty() && trials.empty()) return d;
  if (dev.empty() || trials.empty()) throw ConfigError("dev data and dev trials must be given together");
  d.utts = features ? read_utterances(dev) : backend_input(dev, extractor);
  d.trials = read_trials(trials);
  check_trials_resolve(d.trials, d.utts);
  d.present = true;
  return d;
}

void print_trace_tail(const std::vector<nplda::EpochRecord> &trace, int best) {
  for (const auto &r : trace) {
    std::printf("epoch %3d  loss %.6f  lr %.3g", r.epoch, r.train_loss, r.lr);
    if (r.dev_min_dcf) std::printf("  dev EER %.2f%%  C_Min %.4f", 100.0 * *r.dev_eer, *r.dev_min_dcf);
    std::printf("%s\n", r.epoch == best ? "  *" : "");
  }
}

void write_trace(const std::string &path, const std::vector<nplda::EpochRecord> &trace) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  nplda::write_trace(os, trace);
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common &common, const std::string &out_dir, std::string kind) {
  Config cfg = load_config(common);
  const std::uint64_t seed = require_seed(common);
  if (kind.empty()) kind = cfg.get_string("simulate", "kind", "embeddings");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  const fs::path dir(out_dir);
  if (kind == "embeddings") {
    auto c = benchmark::embedding_config(cfg);
    auto b = benchmark::make_embedding_benchmark(c, seed);
    write_embeddings((dir / "ood_train.txt").string(), b.ood_train);
    write_embeddings((dir / "train.txt").string(), b.train);
    write_embeddings((dir / "dev.txt").string(), b.dev);
    write_trials((dir / "dev_trials.txt").string(), b.dev_trials);
    std::printf("embeddings: D=%d rank=%d phi_scale=%g within_var=%g nuisance rank=%d var=%g\n", c.dim, c.rank,
                c.phi_scale, c.within_var, c.nuisance_rank, c.nuisance_var);
    std::printf("ood_train %zu  train %zu  dev %zu  dev_trials %zu\n", b.ood_train.size(), b.train.size(),
                b.dev.size(), b.dev_trials.size());
  } else if (kind == "features") {
    auto c = benchmark::feature_config(cfg);
    auto b = benchmark::make_feature_benchmark(c, seed);
    write_features((dir / "train.txt").string(), b.train);
    write_features((dir / "dev.txt").string(), b.dev);
    write_trials((dir / "dev_trials.txt").string(), b.dev_trials);
    const e2e::E2EConfig ec2 = e2e_config(cfg, c.feature_dim);
    const auto ex_seed = cfg.get_int<std::uint64_t>("e2e", "extractor_seed", seed);
    to_container(e2e::init_extractor(ec2, ex_seed)).write((dir / "extractor.ckpt").string());
    std::printf("features: d=%d T=%d spread=%g within_std=%g session_std=%g\n", c.feature_dim, c.frames, c.spread,
                c.within_std, c.session_std);
    std::printf("train %zu  dev %zu  dev_trials %zu  extractor seed %llu\n", b.train.size(), b.dev.size(),
                b.dev_trials.size(), static_cast<unsigned long long>(ex_seed));
  } else {
    throw ConfigError("unknown simulate kind '" + kind + "' (embeddings|features)");
  }
  write_resolved(cfg, (dir / "simulate").string(), seed);
  return 0;
}

struct TrainArgs {
  std::string data, dev, dev_trials, init, extractor, out, pooling;
};

int cmd_train_gplda(const Common &common, const TrainArgs &a) {
  Config cfg = load_config(common);
  if (a.out.empty()) throw ConfigError("--out is required");
  const std::string data = data_path(a.data, cfg, "gplda_train");
  if (data.empty()) throw ConfigError("no training data (--data or data.gplda_train)");
  UtteranceSet train = backend_input(data, a.extractor);
  DevInput dev = load_dev(data_path(a.dev, cfg, "dev"), data_path(a.dev_trials, cfg, "dev_trials"), a.extractor,
                          false);
  gplda::EmResult em;
  gplda::PldaModel model = gplda::train_gplda(train, gplda_config(cfg), &em);
  to_container(model).write(a.out);
  {
    std::ofstream os(a.out + ".trace.csv");
    if (!os) throw IoError("cannot write trace");
    os << "iteration,log_likelihood\n";
    for (size_t i = 0; i < em.log_likelihood.size(); ++i)
      os << i << ',' << format_double(em.log_likelihood[i]) << '\n';
  }
  write_resolved(cfg, a.out, common.seed);
  std::printf("gplda: %zu training vectors, dim %ld -> %ld\n", train.size(), static_cast<long>(train.dim()),
              static_cast<long>(model.dim()));
  if (dev.present) {
    auto rep = metrics::evaluate(gplda::score_trials(model, dev.trials, dev.utts), dcf_weights(cfg));
    print_table("GPLDA", "-", "-", rep);
  }
  return 0;
}

int cmd_train_nplda(const Common &common, const TrainArgs &a) {
  Config cfg = load_config(common);
  const std::uint64_t seed = require_seed(common);
  if (a.out.empty()) throw ConfigError("--out is required");
  if (a.init.empty()) throw ConfigError("train nplda needs a gplda checkpoint (--init)");
  const std::string data = data_path(a.data, cfg, "train");
  if (data.empty()) throw ConfigError("no training data (--data or data.train)");
  Container init = Container::read(a.init);
  UtteranceSet train = backend_input(data, a.extractor);
  DevInput dev = load_dev(data_path(a.dev, cfg, "dev"), data_path(a.dev_trials, cfg, "dev_trials"), a.extractor,
                          false);
  const nplda::TrainConfig tc = train_config(cfg, "nplda", seed);
  nplda::NpldaParams params;
  std::string init_name;
  if (kind_of(init) == "gplda") {
    gplda::PldaModel g = gplda::from_container(init);
    double theta = 0.0;
    if (dev.present)
      theta = nplda::finite_min_dcf_threshold(gplda::score_trials(g, dev.trials, dev.utts), tc.loss.weights);
    params = nplda::init_from_gplda(g, theta);
    init_name = "GPLDA";
  } else if (kind_of(init) == "nplda") {
    params = nplda::from_container(init);
    init_name = "NPLDA";
  } else {
    throw ConfigError(a.init + " is not a gplda or nplda checkpoint");
  }
  nplda::DevSet ds{dev.present ? &dev.utts : nullptr, dev.trials};
  auto result = nplda::train(std::move(params), batch_source(cfg, train, seed), train, &ds, tc);
  to_container(result.best).write(a.out);
  write_trace(a.out + ".trace.csv", result.trace);
  write_resolved(cfg, a.out, seed);
  print_trace_tail(result.trace, result.best_epoch);
  if (dev.present) {
    auto rep = metrics::evaluate(nplda::score_trials(result.best, dev.trials, dev.utts), tc.loss.weights);
    print_table("NPLDA", "-", init_name, rep);
  }
  return 0;
}

int cmd_train_e2e(const Common &common, const TrainArgs &a) {
  Config cfg = load_config(common);
  const std::uint64_t seed = require_seed(common);
  if (a.out.empty()) throw ConfigError("--out is required");
  if (!a.pooling.empty()) cfg.set("e2e", "pooling", a.pooling);
  const std::string data = data_path(a.data, cfg, "train");
  if (data.empty()) throw ConfigError("no training data (--data or data.train)");
  UtteranceSet train = read_utterances(data);
  if (train.has_embeddings()) throw ArgumentError(data + " holds embeddings; e2e training needs features");
  DevInput dev = load_dev(data_path(a.dev, cfg, "dev"), data_path(a.dev_trials, cfg, "dev_trials"), "", true);

  std::mt19937_64 rng(seed);
  const std::uint64_t ex_seed = rng(), head_seed = rng();
  e2e::Extractor ex;
  std::string init_name = "random";
  if (!a.extractor.empty()) {
    ex = e2e::extractor_from_container(Container::read(a.extractor));
    init_name = "extractor";
  } else {
    ex = e2e::init_extractor(e2e_config(cfg, train.dim()), ex_seed);
  }
  if (auto p = cfg.get("e2e", "pooling")) ex.config.pooling = nn::parse_pooling(*p);

  nplda::NpldaParams head;
  if (!a.init.empty()) {
    Container c = Container::read(a.init);
    if (kind_of(c) == "nplda") {
      head = nplda::from_container(c);
      init_name = a.extractor.empty() ? "NPLDA" : "xvec+NPLDA";
    } else if (kind_of(c) == "e2e") {
      e2e::E2EModel prev = e2e::from_container(c);
      if (a.extractor.empty()) ex = prev.extractor;
      head = prev.head;
      init_name = "E2E";
    } else {
      throw ConfigError(a.init + " is not an nplda or e2e checkpoint");
    }
  } else {
    const auto head_dim = cfg.get_int<Eigen::Index>("e2e", "head_dim", ex.config.embedding_dim);
    head = e2e::random_head(ex.config.embedding_dim, head_dim, head_seed);
  }
  e2e::E2EModel model = e2e::make_model(std::move(ex), std::move(head));

  e2e::E2ETrainConfig ec;
  ec.train = train_config(cfg, "e2e", seed);
  ec.freeze_prefix = cfg.get_int<size_t>("e2e", "freeze_prefix", 0);
  nplda::DevSet ds{dev.present ? &dev.utts : nullptr, dev.trials};
  auto result = e2e::train_e2e(std::move(model), batch_source(cfg, train, seed), train, &ds, ec);
  to_container(result.best).write(a.out);
  write_trace(a.out + ".trace.csv", result.trace);
  write_resolved(cfg, a.out, seed);
  print_trace_tail(result.trace, result.best_epoch);
  if (dev.present) {
    auto rep = metrics::evaluate(e2e::score_trials(result.best, dev.trials, dev.utts), ec.train.loss.weights);
    print_table("E2E", nn::pooling_name(result.best.extractor.config.pooling), init_name, rep);
  }
  return 0;
}

int cmd_score(const std::string &model_path, const std::string &trials_path, const std::string &data_path_,
              const std::string &extractor, const std::string &out) {
  if (model_path.empty() || trials_path.empty() || data_path_.empty() || out.empty())
    throw ConfigError("score needs --model, --trials, --data and --out");
  Container c = Container::read(model_path);
  std::vector<Trial> trials = read_trials(trials_path);
  ScoredTrialSet scores;
  const std::string kind = kind_of(c);
  if (kind == "gplda") {
    scores = gplda::score_trials(gplda::from_container(c), trials, backend_input(data_path_, extractor));
  } else if (kind == "nplda") {
    scores = nplda::score_trials(nplda::from_container(c), trials, backend_input(data_path_, extractor));
  } else if (kind == "e2e") {
    UtteranceSet utts = read_utterances(data_path_);
    scores = e2e::score_trials(e2e::from_container(c), trials, utts);
  } else {
    throw ConfigError(model_path + " is not a scoring model (kind '" + kind + "')");
  }
  write_scores(out, scores);
  std::printf("scored %zu trials with %s model\n", scores.size(), kind.c_str());
  return 0;
}

int cmd_evaluate(const Common &common, const std::string &scores_path, const std::string &key_path,
                 const std::string &csv, const std::string &model, const std::string &pooling,
                 const std::string &init) {
  Config cfg = load_config(common);
  if (scores_path.empty() || key_path.empty()) throw ConfigError("evaluate needs --scores and --key");
  ScoredTrialSet scored = attach_key(read_scores(scores_path), read_trials(key_path));
  const metrics::DcfWeights w = dcf_weights(cfg);
  metrics::EvalReport rep = metrics::evaluate(scored, w);
  print_table(model, pooling, init, rep);
  std::printf("threshold %s  C_miss %g  C_fa %g  P_target %g  beta %g  trials %zu\n",
              format_double(rep.threshold).c_str(), w.c_miss, w.c_fa, w.p_target, w.beta(), scored.size());
  if (!csv.empty()) {
    std::ofstream os(csv);
    if (!os) throw IoError("cannot open " + csv + " for writing");
    os << "model,pooling,init,eer,min_dcf,threshold,c_miss,c_fa,p_target\n";
    os << model << ',' << pooling << ',' << init << ',' << format_double(rep.eer) << ','
       << format_double(rep.min_dcf) << ',' << format_double(rep.threshold) << ',' << format_double(w.c_miss)
       << ',' << format_double(w.c_fa) << ',' << format_double(w.p_target) << '\n';
  }
  return 0;
}

int cmd_sample(const Common &common, const std::string &data, const std::string &out, int epoch) {
  Config cfg = load_config(common);
  const std::uint64_t seed = require_seed(common);
  if (out.empty()) throw ConfigError("--out is required");
  const std::string path = data_path(data, cfg, "train");
  if (path.empty()) throw ConfigError("no data (--data or data.train)");
  UtteranceSet utts = read_utterances(path);
  auto batches = batch_source(cfg, utts, seed)(epoch);
  std::ofstream os(out);
  if (!os) throw IoError("cannot open " + out + " for writing");
  sampling::write_batches(os, batches);
  if (!os) throw IoError("write to " + out + " failed");
  size_t trials = 0, targets = 0;
  for (const auto &b : batches) {
    trials += b.trials.size();
    targets += b.num_targets();
  }
  std::printf("%zu batches, %zu trials (%zu target)\n", batches.size(), trials, targets);
  write_resolved(cfg, out, seed);
  return 0;
}

int cmd_estimate_mem(const Common &common, const std::string &preset, std::uint64_t n, std::uint64_t t) {
  Config cfg = load_config(common);
  if (!preset.empty()) cfg.set("e2e", "preset", preset);
  const e2e::E2EConfig c = e2e_config(cfg);
  const e2e::MemoryEstimate m = e2e::estimate_memory(n, t, c);
  for (size_t i = 0; i < c.layers.size(); ++i)
    std::printf("layer %zu  k=%ld c=%ld  %llu bytes\n", i, static_cast<long>(c.layers[i].k_in),
                static_cast<long>(c.layers[i].context()), static_cast<unsigned long long>(m.per_layer[i]));
  std::printf("total %llu bytes (%.1f GB)\n", static_cast<unsigned long long>(m.bytes),
              static_cast<double>(m.bytes) / 1e9);
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"spkv: speaker verification backends and end-to-end training"};
  app.require_subcommand(1);

  Common sim_c, gplda_c, nplda_c, e2e_c, eval_c, sample_c, mem_c;
  std::string sim_out, sim_kind;
  auto *sim = app.add_subcommand("simulate", "write a synthetic benchmark");
  add_common(sim, sim_c, true);
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--kind", sim_kind, "embeddings|features (default simulate.kind)");

  auto *train = app.add_subcommand("train", "train a model");
  train->require_subcommand(1);
  TrainArgs ga, na, ea;
  auto add_train = [&](CLI::App *cmd, Common &c, TrainArgs &a) {
    add_common(cmd, c, true);
    cmd->add_option("--data", a.data, "training data file");
    cmd->add_option("--dev", a.dev, "dev data file");
    cmd->add_option("--dev-trials", a.dev_trials, "dev trial key");
    cmd->add_option("--extractor", a.extractor, "extractor checkpoint for feature input");
    cmd->add_option("--out", a.out, "output checkpoint");
  };
  auto *tg = train->add_subcommand("gplda", "EM-trained Gaussian PLDA");
  add_train(tg, gplda_c, ga);
  auto *tn = train->add_subcommand("nplda", "neural PLDA initialized from GPLDA");
  add_train(tn, nplda_c, na);
  tn->add_option("--init", na.init, "gplda (or nplda) checkpoint");
  auto *te = train->add_subcommand("e2e", "end-to-end model");
  add_train(te, e2e_c, ea);
  te->add_option("--init", ea.init, "nplda (or e2e) checkpoint for the head");
  te->add_option("--pooling", ea.pooling, "stddev|variance");

  std::string sc_model, sc_trials, sc_data, sc_extractor, sc_out;
  auto *score = app.add_subcommand("score", "score a trial list");
  score->add_option("--model", sc_model, "model checkpoint");
  score->add_option("--trials", sc_trials, "trial list");
  score->add_option("--data", sc_data, "embeddings or features");
  score->add_option("--extractor", sc_extractor, "extractor checkpoint for feature input to a backend");
  score->add_option("--out", sc_out, "score file");

  std::string ev_scores, ev_key, ev_csv, ev_model = "-", ev_pooling = "-", ev_init = "-";
  auto *evaluate = app.add_subcommand("evaluate", "EER and minimum detection cost");
  add_common(evaluate, eval_c, false);
  evaluate->add_option("--scores", ev_scores, "score file");
  evaluate->add_option("--key", ev_key, "trial key");
  evaluate->add_option("--csv", ev_csv, "also write the report as CSV");
  evaluate->add_option("--model-name", ev_model, "model column of the report");
  evaluate->add_option("--pooling", ev_pooling, "pooling column of the report");
  evaluate->add_option("--init", ev_init, "init column of the report");

  std::string sa_data, sa_out;
  int sa_epoch = 1;
  auto *sample = app.add_subcommand("sample", "write one epoch of training batches");
  add_common(sample, sample_c, true);
  sample->add_option("--data", sa_data, "utterance file");
  sample->add_option("--out", sa_out, "batch file");
  sample->add_option("--epoch", sa_epoch, "epoch index (with sampler.resample)");

  std::string mem_preset;
  std::uint64_t mem_n = 0, mem_t = 0;
  auto *mem = app.add_subcommand("estimate-mem", "activation memory of one e2e training batch");
  add_common(mem, mem_c, false);
  mem->add_option("--preset", mem_preset, "desk|tiny|paper-shape");
  mem->add_option("--trials", mem_n, "trials per batch N")->required();
  mem->add_option("--frames", mem_t, "frames per utterance T")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*sim) return cmd_simulate(sim_c, sim_out, sim_kind);
    if (*tg) return cmd_train_gplda(gplda_c, ga);
    if (*tn) return cmd_train_nplda(nplda_c, na);
    if (*te) return cmd_train_e2e(e2e_c, ea);
    if (*score) return cmd_score(sc_model, sc_trials, sc_data, sc_extractor, sc_out);
    if (*evaluate) return cmd_evaluate(eval_c, ev_scores, ev_key, ev_csv, ev_model, ev_pooling, ev_init);
    if (*sample) return cmd_sample(sample_c, sa_data, sa_out, sa_epoch);
    if (*mem) return cmd_estimate_mem(mem_c, mem_preset, mem_n, mem_t);
  } catch (const Error &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 2;
}
