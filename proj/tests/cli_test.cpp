// tests/cli_test.cpp

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
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;

const char *kEmbeddings =
    "[simulate]\nkind = embeddings\ndim = 6\nrank = 3\nspeakers = 40\nutts_per_speaker = 8\n"
    "domain_speakers = 40\ndomain_utts_per_speaker = 8\ndev_speakers = 20\ndev_utts_per_speaker = 4\n"
    "dev_targets = 50\ndev_nontargets = 200\n"
    "[gplda]\nlda_dim = 6\niterations = 3\n"
    "[sampler]\nutts_per_batch = 32\nm_min = 4\nm_max = 4\n"
    "[nplda]\nepochs = 2\nlr = 1e-3\n";

const char *kFeatures =
    "[simulate]\nkind = features\nfeature_dim = 3\nframes = 12\nspeakers = 16\nutts_per_speaker = 4\n"
    "dev_speakers = 6\ndev_utts_per_speaker = 3\ndev_targets = 10\ndev_nontargets = 40\n"
    "[gplda]\nlda_dim = 4\niterations = 2\n"
    "[sampler]\nutts_per_batch = 16\nm_min = 4\nm_max = 4\n"
    "[nplda]\nepochs = 1\n"
    "[e2e]\npreset = tiny\nhead_dim = 3\nepochs = 2\nlr = 1e-2\n";

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("spkv_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "emb.conf") << kEmbeddings;
    std::ofstream(dir_ / "feat.conf") << kFeatures;
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI inside dir_; stdout and stderr go to out.txt.
  int run(const std::string &args) {
    const std::string cmd =
        "cd '" + dir_.string() + "' && '" SPKV_CLI_PATH "' " + args + " > out.txt 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }
  std::string out() const { return slurp(dir_ / "out.txt"); }
  std::string file(const std::string &name) const { return slurp(dir_ / name); }

  fs::path dir_;
};

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(out().find("estimate-mem"), std::string::npos);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("bogus"), 1);
  EXPECT_EQ(run("estimate-mem --trials 1"), 1);
  EXPECT_EQ(run("simulate --config emb.conf --out d"), 1);  // no seed
  EXPECT_EQ(run("simulate --config missing.conf --seed 1 --out d"), 1);
  EXPECT_EQ(run("simulate --config emb.conf --set gplda.lda_dimm=3 --seed 1 --out d"), 1);
  EXPECT_NE(out().find("lda_dimm"), std::string::npos);
}

TEST_F(Cli, EstimateMemory) {
  ASSERT_EQ(run("estimate-mem --trials 1 --frames 100 --set 'e2e.layer=30 512 -2 -1 0 1 2'"), 0);
  EXPECT_NE(out().find("total 480000 bytes"), std::string::npos);
  ASSERT_EQ(run("estimate-mem --preset paper-shape --trials 2048 --frames 2000"), 0);
  EXPECT_NE(out().find("959.2 GB"), std::string::npos);
}

TEST_F(Cli, SimulateAndSampleAreReproducible) {
  ASSERT_EQ(run("simulate --config emb.conf --seed 3 --out a"), 0) << out();
  ASSERT_EQ(run("simulate --config emb.conf --seed 3 --out b"), 0);
  ASSERT_EQ(run("simulate --config emb.conf --seed 4 --out c"), 0);
  for (const char *f : {"train.txt", "ood_train.txt", "dev.txt", "dev_trials.txt"}) {
    EXPECT_EQ(file(std::string("a/") + f), file(std::string("b/") + f)) << f;
    EXPECT_NE(file(std::string("a/") + f), file(std::string("c/") + f)) << f;
  }
  ASSERT_EQ(run("sample --config emb.conf --seed 5 --data a/train.txt --out s1.txt"), 0) << out();
  ASSERT_EQ(run("sample --config emb.conf --seed 5 --data a/train.txt --out s2.txt"), 0);
  ASSERT_EQ(run("sample --config emb.conf --seed 5 --epoch 2 --data a/train.txt --out s3.txt"), 0);
  EXPECT_EQ(file("s1.txt"), file("s2.txt"));
  EXPECT_NE(file("s1.txt"), file("s3.txt"));
  EXPECT_NE(file("s1.txt").find("# batch"), std::string::npos);
}

TEST_F(Cli, BackendChainIsReproducible) {
  ASSERT_EQ(run("simulate --config emb.conf --seed 1 --out d"), 0) << out();
  const std::string gtrain = "train gplda --config emb.conf --seed 2 --data d/ood_train.txt --out ";
  ASSERT_EQ(run(gtrain + "g1.ckpt"), 0) << out();
  ASSERT_EQ(run(gtrain + "g2.ckpt"), 0);
  EXPECT_EQ(file("g1.ckpt"), file("g2.ckpt"));
  const std::string ntrain =
      "train nplda --config emb.conf --seed 2 --init g1.ckpt --data d/train.txt --dev d/dev.txt "
      "--dev-trials d/dev_trials.txt --out ";
  ASSERT_EQ(run(ntrain + "n1.ckpt"), 0) << out();
  EXPECT_NE(out().find("C_Min"), std::string::npos);
  ASSERT_EQ(run(ntrain + "n2.ckpt"), 0);
  EXPECT_EQ(file("n1.ckpt"), file("n2.ckpt"));
  EXPECT_EQ(file("n1.ckpt.trace.csv"), file("n2.ckpt.trace.csv"));
  EXPECT_NE(file("n1.ckpt.config").find("seed = 2"), std::string::npos);
  EXPECT_EQ(run("train nplda --config emb.conf --seed 2 --data d/train.txt --out x.ckpt"), 1);

  ASSERT_EQ(run("score --model n1.ckpt --trials d/dev_trials.txt --data d/dev.txt --out s.txt"), 0) << out();
  ASSERT_EQ(run("evaluate --scores s.txt --key d/dev_trials.txt --csv r.csv --model-name NPLDA"), 0) << out();
  EXPECT_NE(out().find("NPLDA"), std::string::npos);
  EXPECT_NE(file("r.csv").find("NPLDA"), std::string::npos);
  EXPECT_EQ(run("score --model missing.ckpt --trials d/dev_trials.txt --data d/dev.txt --out s.txt"), 1);
}

TEST_F(Cli, EndToEndChainIsReproducible) {
  ASSERT_EQ(run("simulate --config feat.conf --seed 1 --out d"), 0) << out();
  ASSERT_TRUE(fs::exists(dir_ / "d/extractor.ckpt"));
  ASSERT_EQ(run("train gplda --config feat.conf --seed 1 --data d/train.txt --extractor d/extractor.ckpt "
                "--out g.ckpt"),
            0)
      << out();
  const std::string etrain =
      "train e2e --config feat.conf --seed 1 --extractor d/extractor.ckpt --data d/train.txt --dev d/dev.txt "
      "--dev-trials d/dev_trials.txt --out ";
  ASSERT_EQ(run(etrain + "e1.ckpt"), 0) << out();
  ASSERT_EQ(run(etrain + "e2.ckpt"), 0);
  EXPECT_EQ(file("e1.ckpt"), file("e2.ckpt"));
  EXPECT_EQ(file("e1.ckpt.trace.csv"), file("e2.ckpt.trace.csv"));
  ASSERT_EQ(run("score --model e1.ckpt --trials d/dev_trials.txt --data d/dev.txt --out s.txt"), 0) << out();
  ASSERT_EQ(run("score --model g.ckpt --extractor d/extractor.ckpt --trials d/dev_trials.txt --data d/dev.txt "
                "--out sg.txt"),
            0)
      << out();
}

}  // namespace
