// spkv/sampling.hpp

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

// Trial-batch construction.
//
// Speaker-block batches ("algo 2"): a batch holds utts_per_batch utterances
// from m speakers of one gender and one dataset. Each speaker's utterances
// are split into an enrollment half and a test half, and the batch trials are
// the full enrollment x test cross product, so 64 utterances give 32 x 32 =
// 1024 trials.
//
// Pairwise batches ("algo 1"): trials are drawn one pair at a time inside a
// gender/dataset partition, never reusing an utterance within an epoch, then
// pooled across partitions, shuffled and cut into fixed-size batches.

#ifndef SPKV_SAMPLING_HPP_
#define SPKV_SAMPLING_HPP_

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "spkv/data.hpp"
#include "spkv/data_io.hpp"

namespace spkv::sampling {

struct TrialBatch {
  std::vector<std::string> enroll_ids;
  std::vector<std::string> test_ids;
  std::vector<Trial> trials;
  std::optional<Gender> gender;            // unset when mixed
  std::optional<std::string> dataset_id;  // unset when mixed
  int num_speakers = 0;
  std::uint64_t seed = 0;

  /// Distinct utterance ids referenced by the trials, in first-use order.
  std::vector<std::string> utterance_ids() const {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const Trial &t : trials) {
      if (seen.insert(t.enroll_id).second) out.push_back(t.enroll_id);
      if (seen.insert(t.test_id).second) out.push_back(t.test_id);
    }
    return out;
  }

  size_t num_targets() const {
    return static_cast<size_t>(std::count_if(trials.begin(), trials.end(), [](const Trial &t) {
      return t.label == Label::kTarget;
    }));
  }

  bool operator==(const TrialBatch &o) const = default;
};

struct SamplerConfig {
  int utts_per_batch = 64;
  int m_min = 3;
  int m_max = 8;
  int trials_per_batch = 1024;  // pairwise batches
  double target_ratio = 0.5;    // pairwise batches
  // Speaker-block batches per partition; 0 = partition size / utts_per_batch.
  int batches_per_partition = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (utts_per_batch < 4 || utts_per_batch % 2 != 0)
      throw ArgumentError("utts_per_batch must be even and at least 4");
    if (m_min < 2 || m_max < m_min) throw ArgumentError("speaker range must satisfy 2 <= m_min <= m_max");
    if (2 * m_max > utts_per_batch) throw ArgumentError("m_max speakers cannot share utts_per_batch utterances");
    if (trials_per_batch < 1) throw ArgumentError("trials_per_batch must be positive");
    if (target_ratio < 0 || target_ratio > 1) throw ArgumentError("target_ratio must lie in [0, 1]");
  }
};

/// Utterances sharing one gender and one dataset.
struct Partition {
  Gender gender = Gender::kMale;
  std::string dataset_id;
  std::vector<size_t> utterances;

  std::string name() const { return dataset_id + "/" + gender_code(gender); }
};

inline std::vector<Partition> partitions(const UtteranceSet &utts) {
  std::map<std::pair<std::string, char>, Partition> parts;
  for (size_t i = 0; i < utts.size(); ++i) {
    auto &p = parts[{utts[i].dataset_id, gender_code(utts[i].gender)}];
    p.gender = utts[i].gender;
    p.dataset_id = utts[i].dataset_id;
    p.utterances.push_back(i);
  }
  std::vector<Partition> out;
  for (auto &[key, p] : parts) out.push_back(std::move(p));
  return out;
}

namespace detail {

struct SpeakerPool {
  std::string speaker;
  std::vector<size_t> utterances;
};

/// Speakers of a partition in order of first appearance.
inline std::vector<SpeakerPool> speakers_of(const UtteranceSet &utts, const Partition &part) {
  std::vector<SpeakerPool> out;
  std::map<std::string, size_t> pos;
  for (size_t i : part.utterances) {
    auto [it, inserted] = pos.emplace(utts[i].speaker_id, out.size());
    if (inserted) out.push_back({utts[i].speaker_id, {}});
    out[it->second].utterances.push_back(i);
  }
  return out;
}

inline size_t uniform_index(std::mt19937_64 &rng, size_t n) {
  return std::uniform_int_distribution<size_t>(0, n - 1)(rng);
}

}  // namespace detail

/// Enrollment/test pair counts per speaker: pairs = utts_per_batch / 2 spread
/// as evenly as possible, remainder round-robin from the first speaker, with
/// overflow beyond a speaker's capacity moved to speakers that have room.
inline std::vector<int> allocate_pairs(int total_pairs, const std::vector<int> &capacity) {
  const int m = static_cast<int>(capacity.size());
  if (m == 0) throw SamplerError("no speakers to allocate");
  std::vector<int> alloc(static_cast<size_t>(m), total_pairs / m);
  for (int i = 0; i < total_pairs % m; ++i) ++alloc[static_cast<size_t>(i)];
  int overflow = 0;
  for (int i = 0; i < m; ++i) {
    auto ui = static_cast<size_t>(i);
    if (alloc[ui] > capacity[ui]) {
      overflow += alloc[ui] - capacity[ui];
      alloc[ui] = capacity[ui];
    }
  }
  for (int i = 0; overflow > 0;) {
    bool progress = false;
    for (int j = 0; j < m && overflow > 0; ++j, i = (i + 1) % m) {
      auto ui = static_cast<size_t>(i);
      if (alloc[ui] < capacity[ui]) {
        ++alloc[ui];
        --overflow;
        progress = true;
      }
    }
    if (!progress) throw SamplerError("speakers hold too few utterances for the batch");
  }
  return alloc;
}

/// A speaker-block batch from the given speakers (at least 2 utterances
/// each).
inline TrialBatch build_block_batch(const UtteranceSet &utts, const std::vector<detail::SpeakerPool> &speakers,
                                    int utts_per_batch, std::mt19937_64 &rng) {
  std::vector<int> capacity;
  for (const auto &s : speakers) capacity.push_back(static_cast<int>(s.utterances.size() / 2));
  std::vector<int> alloc = allocate_pairs(utts_per_batch / 2, capacity);
  TrialBatch batch;
  batch.num_speakers = static_cast<int>(speakers.size());
  std::vector<std::string> enroll_spk, test_spk;
  for (size_t s = 0; s < speakers.size(); ++s) {
    std::vector<size_t> pool = speakers[s].utterances;
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto half = static_cast<size_t>(alloc[s]);
    for (size_t i = 0; i < half; ++i) {
      batch.enroll_ids.push_back(utts[pool[i]].id);
      enroll_spk.push_back(speakers[s].speaker);
      batch.test_ids.push_back(utts[pool[half + i]].id);
      test_spk.push_back(speakers[s].speaker);
    }
  }
  for (size_t e = 0; e < batch.enroll_ids.size(); ++e)
    for (size_t t = 0; t < batch.test_ids.size(); ++t)
      batch.trials.push_back({batch.enroll_ids[e], batch.test_ids[t],
                              enroll_spk[e] == test_spk[t] ? Label::kTarget : Label::kNontarget});
  const Utterance &first = utts.at(batch.enroll_ids.front());
  batch.gender = first.gender;
  batch.dataset_id = first.dataset_id;
  return batch;
}

/// One speaker-block batch from a single gender/dataset partition with m
/// randomly chosen speakers.
inline TrialBatch sample_batch_algo2(const UtteranceSet &utts, const Partition &part, int m,
                                     std::uint64_t seed, int utts_per_batch = 64) {
  if (m < 2 || 2 * m > utts_per_batch) throw ArgumentError("invalid speaker count m = " + std::to_string(m));
  std::vector<detail::SpeakerPool> eligible;
  for (auto &s : detail::speakers_of(utts, part))
    if (s.utterances.size() >= 2) eligible.push_back(std::move(s));
  if (static_cast<int>(eligible.size()) < m)
    throw SamplerError("partition " + part.name() + " has " + std::to_string(eligible.size()) +
                       " speakers with >= 2 utterances, need " + std::to_string(m));
  std::mt19937_64 rng(seed);
  std::shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(static_cast<size_t>(m));
  try {
    TrialBatch b = build_block_batch(utts, eligible, utts_per_batch, rng);
    b.seed = seed;
    return b;
  } catch (const SamplerError &e) {
    throw SamplerError("partition " + part.name() + ": " + e.what());
  }
}

/// Shuffles batch order. Batches stay intact.
inline std::vector<TrialBatch> pool_and_shuffle(std::vector<TrialBatch> batches, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

/// Speaker-block batches for every partition, m cycling over
/// [m_min, m_max]. Speakers are drawn without replacement until a
/// partition's pool is exhausted, then the pool is reshuffled. The pooled
/// batches are shuffled.
inline std::vector<TrialBatch> sample_algo2_epoch(const UtteranceSet &utts, const SamplerConfig &cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::vector<TrialBatch> all;
  for (const Partition &part : partitions(utts)) {
    std::vector<detail::SpeakerPool> eligible;
    for (auto &s : detail::speakers_of(utts, part))
      if (s.utterances.size() >= 2) eligible.push_back(std::move(s));
    if (eligible.size() < 2) {
      warn("partition " + part.name() + " has fewer than 2 usable speakers; skipped");
      continue;
    }
    int n_batches = cfg.batches_per_partition > 0
                        ? cfg.batches_per_partition
                        : std::max<int>(1, static_cast<int>(part.utterances.size()) / cfg.utts_per_batch);
    std::vector<size_t> queue;
    size_t next = 0;
    for (int b = 0; b < n_batches; ++b) {
      int m = cfg.m_min + b % (cfg.m_max - cfg.m_min + 1);
      m = std::min<int>(m, static_cast<int>(eligible.size()));
      if (queue.size() - next < static_cast<size_t>(m)) {
        queue.resize(eligible.size());
        std::iota(queue.begin(), queue.end(), size_t{0});
        std::shuffle(queue.begin(), queue.end(), rng);
        next = 0;
      }
      std::vector<detail::SpeakerPool> chosen;
      for (int i = 0; i < m; ++i) chosen.push_back(eligible[queue[next++]]);
      const std::uint64_t batch_seed = rng();
      std::mt19937_64 batch_rng(batch_seed);
      try {
        TrialBatch batch = build_block_batch(utts, chosen, cfg.utts_per_batch, batch_rng);
        batch.seed = batch_seed;
        all.push_back(std::move(batch));
      } catch (const SamplerError &e) {
        throw SamplerError("partition " + part.name() + ": " + e.what());
      }
    }
  }
  return pool_and_shuffle(std::move(all), rng());
}

namespace detail {

inline TrialBatch batch_from_trials(const UtteranceSet &utts, std::vector<Trial> trials, std::uint64_t seed) {
  TrialBatch b;
  b.seed = seed;
  std::set<std::string> speakers;
  bool same_gender = true, same_dataset = true;
  for (const Trial &t : trials) {
    b.enroll_ids.push_back(t.enroll_id);
    b.test_ids.push_back(t.test_id);
    for (const std::string *id : {&t.enroll_id, &t.test_id}) {
      const Utterance &u = utts.at(*id);
      speakers.insert(u.speaker_id);
      const Utterance &first = utts.at(trials.front().enroll_id);
      same_gender &= u.gender == first.gender;
      same_dataset &= u.dataset_id == first.dataset_id;
    }
  }
  if (!trials.empty()) {
    const Utterance &first = utts.at(trials.front().enroll_id);
    if (same_gender) b.gender = first.gender;
    if (same_dataset) b.dataset_id = first.dataset_id;
  }
  b.num_speakers = static_cast<int>(speakers.size());
  b.trials = std::move(trials);
  return b;
}

}  // namespace detail

/// Pooled trials of all batches, shuffled and re-cut into batches of
/// `batch_size` (the last batch may be smaller).
inline std::vector<TrialBatch> rebatch_trials(const UtteranceSet &utts, const std::vector<TrialBatch> &batches,
                                              size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw ArgumentError("batch size must be positive");
  std::vector<Trial> pooled;
  for (const auto &b : batches) pooled.insert(pooled.end(), b.trials.begin(), b.trials.end());
  std::mt19937_64 rng(seed);
  std::shuffle(pooled.begin(), pooled.end(), rng);
  std::vector<TrialBatch> out;
  for (size_t start = 0; start < pooled.size(); start += batch_size) {
    const size_t end = std::min(pooled.size(), start + batch_size);
    out.push_back(detail::batch_from_trials(
        utts, std::vector<Trial>(pooled.begin() + static_cast<std::ptrdiff_t>(start),
                                 pooled.begin() + static_cast<std::ptrdiff_t>(end)),
        seed));
  }
  return out;
}

/// Pairwise sampling: each trial takes an enrollment utterance of a random
/// speaker and a test utterance of the same speaker (target) or of another
/// speaker of the same gender and dataset (non-target). No utterance is used
/// twice. The pooled trials are shuffled and cut into batches.
inline std::vector<TrialBatch> sample_trials_algo1(const UtteranceSet &utts, size_t n_trials,
                                                   double target_ratio, size_t batch_size,
                                                   std::uint64_t seed) {
  if (target_ratio < 0 || target_ratio > 1) throw ArgumentError("target_ratio must lie in [0, 1]");
  if (batch_size == 0) throw ArgumentError("batch size must be positive");
  std::mt19937_64 rng(seed);
  struct PartState {
    std::vector<std::vector<size_t>> unused;  // per speaker, shuffled
  };
  std::vector<PartState> parts;
  for (const Partition &p : partitions(utts)) {
    PartState st;
    for (auto &s : detail::speakers_of(utts, p)) {
      std::shuffle(s.utterances.begin(), s.utterances.end(), rng);
      st.unused.push_back(std::move(s.utterances));
    }
    parts.push_back(std::move(st));
  }
  if (parts.empty()) throw SamplerError("no utterances to sample from");

  const size_t n_targets = static_cast<size_t>(std::llround(target_ratio * static_cast<double>(n_trials)));
  std::vector<bool> is_target(n_trials, false);
  std::fill(is_target.begin(), is_target.begin() + static_cast<std::ptrdiff_t>(n_targets), true);
  std::shuffle(is_target.begin(), is_target.end(), rng);

  auto take = [&](std::vector<size_t> &pool) {
    size_t u = pool.back();
    pool.pop_back();
    return u;
  };

  std::vector<Trial> trials;
  trials.reserve(n_trials);
  for (size_t i = 0; i < n_trials; ++i) {
    const bool target = is_target[i];
    // Partitions that can still supply this kind of trial, weighted by the
    // number of unused utterances they hold.
    std::vector<size_t> weights(parts.size(), 0);
    for (size_t p = 0; p < parts.size(); ++p) {
      size_t remaining = 0, with_two = 0, with_one = 0;
      for (const auto &pool : parts[p].unused) {
        remaining += pool.size();
        with_two += pool.size() >= 2;
        with_one += !pool.empty();
      }
      if (target ? with_two > 0 : with_one >= 2) weights[p] = remaining;
    }
    const size_t total = std::accumulate(weights.begin(), weights.end(), size_t{0});
    if (total == 0)
      throw SamplerError("requested " + std::to_string(n_trials) + " trials; only " + std::to_string(trials.size()) +
                         " achievable without repeating utterances in this epoch");
    size_t pick = detail::uniform_index(rng, total), p = 0;
    while (pick >= weights[p]) pick -= weights[p++];
    auto &unused = parts[p].unused;

    std::vector<size_t> candidates;
    for (size_t s = 0; s < unused.size(); ++s)
      if (unused[s].size() >= (target ? 2u : 1u)) candidates.push_back(s);
    const size_t spk = candidates[detail::uniform_index(rng, candidates.size())];
    const size_t enroll = take(unused[spk]);
    size_t test;
    if (target) {
      test = take(unused[spk]);
    } else {
      std::vector<size_t> others;
      for (size_t s = 0; s < unused.size(); ++s)
        if (s != spk && !unused[s].empty()) others.push_back(s);
      test = take(unused[others[detail::uniform_index(rng, others.size())]]);
    }
    trials.push_back({utts[enroll].id, utts[test].id, target ? Label::kTarget : Label::kNontarget});
  }

  std::shuffle(trials.begin(), trials.end(), rng);
  const std::uint64_t batch_seed = rng();
  std::vector<TrialBatch> out;
  for (size_t start = 0; start < trials.size(); start += batch_size) {
    const size_t end = std::min(trials.size(), start + batch_size);
    out.push_back(detail::batch_from_trials(
        utts, std::vector<Trial>(trials.begin() + static_cast<std::ptrdiff_t>(start),
                                 trials.begin() + static_cast<std::ptrdiff_t>(end)),
        batch_seed));
  }
  return out;
}

/// Evaluation trials: up to n_targets distinct same-speaker pairs and
/// n_nontargets distinct different-speaker pairs, both sides from the same
/// gender and dataset.
inline std::vector<Trial> sample_eval_trials(const UtteranceSet &utts, size_t n_targets, size_t n_nontargets,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<size_t, size_t>> target_pairs;
  std::vector<const Partition *> usable;
  auto parts = partitions(utts);
  for (const Partition &p : parts) {
    for (const auto &s : detail::speakers_of(utts, p))
      for (size_t i = 0; i < s.utterances.size(); ++i)
        for (size_t j = i + 1; j < s.utterances.size(); ++j)
          target_pairs.emplace_back(s.utterances[i], s.utterances[j]);
    if (detail::speakers_of(utts, p).size() >= 2) usable.push_back(&p);
  }
  std::shuffle(target_pairs.begin(), target_pairs.end(), rng);
  if (target_pairs.size() > n_targets) target_pairs.resize(n_targets);
  std::sort(target_pairs.begin(), target_pairs.end());

  std::set<std::pair<size_t, size_t>> non_pairs;
  if (!usable.empty() && n_nontargets > 0) {
    size_t max_possible = 0;
    for (const Partition *p : usable) {
      const size_t n = p->utterances.size();
      max_possible += n * (n - 1) / 2;
    }
    const size_t want = std::min(n_nontargets, max_possible);
    size_t attempts = 0;
    while (non_pairs.size() < want && attempts < 50 * want + 1000) {
      ++attempts;
      const Partition &p = *usable[detail::uniform_index(rng, usable.size())];
      size_t a = p.utterances[detail::uniform_index(rng, p.utterances.size())];
      size_t b = p.utterances[detail::uniform_index(rng, p.utterances.size())];
      if (utts[a].speaker_id == utts[b].speaker_id) continue;
      if (a > b) std::swap(a, b);
      non_pairs.emplace(a, b);
    }
  }
  std::vector<Trial> out;
  for (auto [a, b] : target_pairs) out.push_back({utts[a].id, utts[b].id, Label::kTarget});
  for (auto [a, b] : non_pairs) out.push_back({utts[a].id, utts[b].id, Label::kNontarget});
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: trial-file lines grouped under a manifest comment
//   # batch <gender|-> <dataset|-> <m> <seed>
// so that a batch file is also a valid trial file.

inline void write_batches(std::ostream &os, const std::vector<TrialBatch> &batches) {
  for (const TrialBatch &b : batches) {
    os << "# batch " << (b.gender ? std::string(1, gender_code(*b.gender)) : "-") << ' '
       << (b.dataset_id ? *b.dataset_id : "-") << ' ' << b.num_speakers << ' ' << b.seed << '\n';
    write_trials(os, b.trials);
  }
}

inline std::vector<TrialBatch> read_batches(std::istream &is, const std::string &what = "<stream>") {
  std::vector<TrialBatch> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "#") {
      if (tok.size() >= 2 && tok[1] == "batch") {
        if (tok.size() != 6) throw ParseError(what + ":" + std::to_string(line_no) + ": bad batch manifest");
        TrialBatch b;
        if (tok[2] != "-") b.gender = parse_gender(tok[2]);
        if (tok[3] != "-") b.dataset_id = std::string(tok[3]);
        if (!parse_int(tok[4], &b.num_speakers) || !parse_int(tok[5], &b.seed))
          throw ParseError(what + ":" + std::to_string(line_no) + ": bad batch manifest");
        out.push_back(std::move(b));
      }
      continue;
    }
    if (out.empty()) throw ParseError(what + ":" + std::to_string(line_no) + ": trial before batch manifest");
    std::istringstream one(line);
    auto trials = read_trials(one, what + ":" + std::to_string(line_no));
    out.back().trials.insert(out.back().trials.end(), trials.begin(), trials.end());
  }
  for (TrialBatch &b : out) {
    std::unordered_set<std::string> seen_e, seen_t;
    for (const Trial &t : b.trials) {
      if (seen_e.insert(t.enroll_id).second) b.enroll_ids.push_back(t.enroll_id);
      if (seen_t.insert(t.test_id).second) b.test_ids.push_back(t.test_id);
    }
  }
  return out;
}

}  // namespace spkv::sampling

#endif  // SPKV_SAMPLING_HPP_
