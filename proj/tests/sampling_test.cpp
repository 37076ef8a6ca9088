// tests/sampling_test.cpp

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

#include <set>
#include <sstream>

#include "spkv/sampling.hpp"

namespace spkv::sampling {
namespace {

// Two genders and two datasets; `utts` utterances per speaker.
UtteranceSet mixed_set(int speakers, int utts) {
  UtteranceSet out;
  for (Gender g : {Gender::kMale, Gender::kFemale})
    for (const char *ds : {"swbd", "sre"}) {
      UtteranceSet part = synth_plda_embeddings(Matrix::Identity(2, 1), Matrix::Identity(2, 2), speakers, utts,
                                                static_cast<std::uint64_t>(speakers), {g, ds, "spk"});
      for (const Utterance &u : part) out.add(u);
    }
  return out;
}

// Reference counts for a speaker block with per-speaker pair counts a_s:
// the batch is (sum a)^2 trials, sum a_s^2 of them targets.
std::pair<size_t, size_t> block_counts(const std::vector<int> &alloc) {
  size_t total = 0, targets = 0;
  for (int a : alloc) {
    total += static_cast<size_t>(a);
    targets += static_cast<size_t>(a * a);
  }
  return {total * total, targets};
}

TEST(AllocatePairs, EvenSplitRemainderAndOverflow) {
  EXPECT_EQ(allocate_pairs(32, {8, 8, 8, 8}), (std::vector<int>{8, 8, 8, 8}));
  EXPECT_EQ(allocate_pairs(32, {10, 10, 10, 10, 10}), (std::vector<int>{7, 7, 6, 6, 6}));
  std::vector<int> capped = allocate_pairs(32, {2, 20, 20});
  EXPECT_EQ(capped[0], 2);
  EXPECT_EQ(capped[0] + capped[1] + capped[2], 32);
  EXPECT_THROW(allocate_pairs(32, {4, 4, 4}), SamplerError);
  EXPECT_THROW(allocate_pairs(4, {}), SamplerError);
}

TEST(Algo2, FourSpeakerBlockCounts) {
  UtteranceSet u = mixed_set(10, 20);
  auto parts = partitions(u);
  ASSERT_EQ(parts.size(), 4u);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TrialBatch b = sample_batch_algo2(u, parts[seed % 4], 4, seed);
    EXPECT_EQ(b.utterance_ids().size(), 64u);
    EXPECT_EQ(b.trials.size(), 1024u);
    EXPECT_EQ(b.num_targets(), 256u);
    EXPECT_EQ(b.trials.size() - b.num_targets(), 768u);
    std::set<std::pair<Gender, std::string>> groups;
    for (const auto &id : b.utterance_ids()) groups.insert({u.at(id).gender, u.at(id).dataset_id});
    EXPECT_EQ(groups.size(), 1u);
    for (const Trial &t : b.trials)
      EXPECT_EQ(t.label == Label::kTarget, u.at(t.enroll_id).speaker_id == u.at(t.test_id).speaker_id);
  }
}

TEST(Algo2, CountsMatchBlockFormulaForEveryM) {
  UtteranceSet u = mixed_set(20, 16);
  Partition p = partitions(u)[0];
  for (int m = 4; m <= 10; ++m) {
    TrialBatch b = sample_batch_algo2(u, p, m, 100 + m);
    std::vector<int> alloc = allocate_pairs(32, std::vector<int>(static_cast<size_t>(m), 8));
    auto [total, targets] = block_counts(alloc);
    EXPECT_EQ(b.trials.size(), total) << "m " << m;
    EXPECT_EQ(b.num_targets(), targets) << "m " << m;
    EXPECT_EQ(b.num_speakers, m);
  }
  EXPECT_THROW(sample_batch_algo2(u, p, 1, 0), ArgumentError);
  EXPECT_THROW(sample_batch_algo2(u, p, 33, 0), ArgumentError);
  EXPECT_THROW(sample_batch_algo2(u, p, 21, 0, 64), SamplerError);
}

TEST(Algo2, EpochBatchesArePureAndDistinct) {
  UtteranceSet u = mixed_set(30, 8);
  SamplerConfig c;
  c.m_min = 8;
  c.m_max = 12;
  c.seed = 5;
  auto batches = sample_algo2_epoch(u, c);
  EXPECT_EQ(batches.size(), 4u * (30 * 8 / 64));
  for (const TrialBatch &b : batches) {
    ASSERT_TRUE(b.gender.has_value());
    ASSERT_TRUE(b.dataset_id.has_value());
    auto ids = b.utterance_ids();
    std::set<std::string> uniq(ids.begin(), ids.end());
    EXPECT_EQ(uniq.size(), ids.size());
    EXPECT_EQ(ids.size(), 64u);
    for (const auto &id : ids) {
      EXPECT_EQ(u.at(id).gender, *b.gender);
      EXPECT_EQ(u.at(id).dataset_id, *b.dataset_id);
    }
  }
  EXPECT_EQ(sample_algo2_epoch(u, c), batches);
  c.seed = 6;
  EXPECT_NE(sample_algo2_epoch(u, c), batches);
}

TEST(Algo2, SpeakersCycleBeforeRepeating) {
  UtteranceSet u = synth_plda_embeddings(Matrix::Identity(2, 1), Matrix::Identity(2, 2), 40, 8, 3);
  SamplerConfig c;
  c.m_min = 8;
  c.m_max = 8;
  c.batches_per_partition = 5;  // 5 x 8 = every speaker once
  auto batches = sample_algo2_epoch(u, c);
  std::set<std::string> speakers;
  for (const auto &b : batches)
    for (const auto &id : b.enroll_ids) speakers.insert(u.at(id).speaker_id);
  EXPECT_EQ(speakers.size(), 40u);
}

TEST(Algo2, SmallPartitionIsSkippedWithWarning) {
  UtteranceSet u = synth_plda_embeddings(Matrix::Identity(2, 1), Matrix::Identity(2, 2), 20, 8, 3);
  u.add({"lonely", "solo", Gender::kFemale, "other", Embedding{Vector::Zero(2)}});
  std::vector<std::string> warnings;
  auto saved = warning_sink();
  warning_sink() = [&](const std::string &m) { warnings.push_back(m); };
  SamplerConfig c;
  c.m_min = 8;
  c.m_max = 8;
  auto batches = sample_algo2_epoch(u, c);
  warning_sink() = saved;
  EXPECT_FALSE(batches.empty());
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("other/F"), std::string::npos);
}

TEST(Algo1, NeverRepeatsAnUtterance) {
  UtteranceSet u = mixed_set(25, 6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto batches = sample_trials_algo1(u, 200, 0.5, 64, seed);
    std::set<std::string> used;
    size_t trials = 0, targets = 0;
    for (const auto &b : batches) {
      EXPECT_LE(b.trials.size(), 64u);
      for (const Trial &t : b.trials) {
        EXPECT_TRUE(used.insert(t.enroll_id).second);
        EXPECT_TRUE(used.insert(t.test_id).second);
        const Utterance &e = u.at(t.enroll_id), &s = u.at(t.test_id);
        EXPECT_EQ(t.label == Label::kTarget, e.speaker_id == s.speaker_id);
        EXPECT_EQ(e.gender, s.gender);
        EXPECT_EQ(e.dataset_id, s.dataset_id);
        targets += t.label == Label::kTarget;
        ++trials;
      }
    }
    EXPECT_EQ(trials, 200u);
    EXPECT_EQ(targets, 100u);
  }
}

TEST(Algo1, TooManyTrialsIsReported) {
  UtteranceSet u = mixed_set(5, 4);  // 80 utterances, at most 40 trials
  try {
    sample_trials_algo1(u, 41, 0.5, 16, 1);
    FAIL() << "expected SamplerError";
  } catch (const SamplerError &e) {
    EXPECT_NE(std::string(e.what()).find("requested 41 trials"), std::string::npos);
  }
  EXPECT_NO_THROW(sample_trials_algo1(u, 32, 0.5, 16, 1));
  EXPECT_THROW(sample_trials_algo1(u, 10, 1.5, 16, 1), ArgumentError);
  EXPECT_THROW(sample_trials_algo1(u, 10, 0.5, 0, 1), ArgumentError);
}

TEST(EvalTrials, DistinctAndCorrectlyLabeled) {
  UtteranceSet u = mixed_set(10, 5);
  auto trials = sample_eval_trials(u, 100, 500, 3);
  size_t targets = 0;
  std::set<std::pair<std::string, std::string>> seen;
  for (const Trial &t : trials) {
    EXPECT_TRUE(seen.insert({t.enroll_id, t.test_id}).second);
    EXPECT_NE(t.enroll_id, t.test_id);
    EXPECT_EQ(t.label == Label::kTarget, u.at(t.enroll_id).speaker_id == u.at(t.test_id).speaker_id);
    EXPECT_EQ(u.at(t.enroll_id).dataset_id, u.at(t.test_id).dataset_id);
    targets += t.label == Label::kTarget;
  }
  EXPECT_EQ(targets, 100u);
  EXPECT_EQ(trials.size(), 600u);
  EXPECT_EQ(sample_eval_trials(u, 100, 500, 3), trials);
}

TEST(Serialize, BatchFileRoundTrip) {
  UtteranceSet u = mixed_set(12, 16);
  SamplerConfig c;
  c.m_min = 4;
  c.m_max = 6;
  auto batches = sample_algo2_epoch(u, c);
  std::stringstream ss;
  write_batches(ss, batches);
  EXPECT_EQ(read_batches(ss), batches);
  auto a1 = sample_trials_algo1(u, 60, 0.5, 25, 4);
  std::stringstream s2;
  write_batches(s2, a1);
  EXPECT_EQ(read_batches(s2), a1);
  std::istringstream orphan("a b target\n");
  EXPECT_THROW(read_batches(orphan), ParseError);
}

TEST(Rebatch, KeepsEveryTrial) {
  UtteranceSet u = mixed_set(12, 16);
  SamplerConfig c;
  c.m_min = 4;
  c.m_max = 4;
  auto batches = sample_algo2_epoch(u, c);
  auto re = rebatch_trials(u, batches, 500, 9);
  size_t before = 0, after = 0;
  for (const auto &b : batches) before += b.trials.size();
  for (const auto &b : re) {
    after += b.trials.size();
    EXPECT_LE(b.trials.size(), 500u);
  }
  EXPECT_EQ(before, after);
}

TEST(Config, Validation) {
  SamplerConfig c;
  c.m_min = 5;
  c.m_max = 4;
  EXPECT_THROW(c.validate(), ArgumentError);
  SamplerConfig d;
  d.m_min = 1;
  EXPECT_THROW(d.validate(), ArgumentError);
}

}  // namespace
}  // namespace spkv::sampling
