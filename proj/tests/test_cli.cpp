// Copyright 2026 The dr2l Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef DR2L_CLI_PATH
#error "DR2L_CLI_PATH must name the dr2l binary"
#endif

namespace {

namespace fs = std::filesystem;

struct Invocation {
  int status = -1;
  std::string output;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dr2l_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Invocation cli(const std::string& args) const {
    const fs::path log = dir_ / "cli.log";
    const std::string cmd = std::string(DR2L_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    Invocation r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.output = slurp(log);
    return r;
  }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

constexpr const char* kSmall = R"({"total_episodes": 30, "generator": {"initial_lower": 5, "initial_upper": 25}, "eval": {"episodes": 5}})";

TEST_F(CliTest, InfeasibleRewardFailsWithTheBound) {
  const auto cfg = write("bad.json", R"({"env": {"r_arrive": 5, "r_collision": 0}})");
  const Invocation v = cli("validate-config --config " + cfg.string());
  EXPECT_NE(v.status, 0);
  EXPECT_NE(v.output.find("2d/v_max = 13.33"), std::string::npos) << v.output;
  const Invocation t = cli("train --config " + cfg.string() + " --out " + (dir_ / "run").string());
  EXPECT_NE(t.status, 0);
  EXPECT_NE(t.output.find("13.33"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "run" / "metrics.jsonl"));
}

TEST_F(CliTest, UnknownKeyFails) {
  const auto cfg = write("typo.json", R"({"agent": {"batchsize": 4}})");
  const Invocation v = cli("validate-config --config " + cfg.string());
  EXPECT_NE(v.status, 0);
  EXPECT_NE(v.output.find("batchsize"), std::string::npos) << v.output;
}

TEST_F(CliTest, ZeroEpisodesWritesEmptyLogs) {
  const Invocation t = cli("train --episodes 0 --out " + (dir_ / "run").string());
  ASSERT_EQ(t.status, 0) << t.output;
  EXPECT_TRUE(slurp(dir_ / "run" / "metrics.jsonl").empty());
  EXPECT_TRUE(fs::exists(dir_ / "run" / "config.json"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "snapshots" / "dr" / "weights.txt"));
}

TEST_F(CliTest, SeedOverrideControlsTheLog) {
  const auto cfg = write("small.json", kSmall);
  const std::string base = "train --config " + cfg.string();
  ASSERT_EQ(cli(base + " --seed 4 --out " + (dir_ / "a").string()).status, 0);
  ASSERT_EQ(cli(base + " --seed 4 --out " + (dir_ / "b").string()).status, 0);
  ASSERT_EQ(cli(base + " --seed 5 --out " + (dir_ / "c").string()).status, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "metrics.jsonl"), slurp(dir_ / "b" / "metrics.jsonl"));
  EXPECT_NE(slurp(dir_ / "a" / "metrics.jsonl"), slurp(dir_ / "c" / "metrics.jsonl"));
}

TEST_F(CliTest, NonEmptyOutputNeedsForce) {
  const auto cfg = write("small.json", kSmall);
  const std::string base = "train --config " + cfg.string() + " --out " + (dir_ / "run").string();
  ASSERT_EQ(cli(base).status, 0);
  const Invocation again = cli(base);
  EXPECT_NE(again.status, 0);
  EXPECT_NE(again.output.find("--force"), std::string::npos);
  EXPECT_EQ(cli(base + " --force").status, 0);
}

TEST_F(CliTest, GridAndExport) {
  const auto cfg = write("small.json", kSmall);
  const fs::path run = dir_ / "run";
  ASSERT_EQ(cli("train --config " + cfg.string() + " --out " + run.string()).status, 0);

  const Invocation g1 = cli("grid " + run.string() + " --episodes 20 --out " + (dir_ / "g1").string());
  ASSERT_EQ(g1.status, 0) << g1.output;
  const Invocation g2 = cli("grid " + run.string() + " --episodes 20 --out " + (dir_ / "g2").string());
  ASSERT_EQ(g2.status, 0);
  const std::string csv = slurp(dir_ / "g1" / "grid.csv");
  EXPECT_EQ(csv, slurp(dir_ / "g2" / "grid.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
  EXPECT_NE(cli("grid " + run.string() + " --episodes 20 --out " + (dir_ / "g1").string()).status, 0);

  const Invocation e = cli("export " + run.string());
  ASSERT_EQ(e.status, 0) << e.output;
  const std::string samples = slurp(run / "export" / "samples.csv");
  EXPECT_EQ(std::count(samples.begin(), samples.end(), '\n'), 31);
  EXPECT_EQ(samples, slurp(run / "samples.csv"));
}

TEST_F(CliTest, GridNamesMissingSnapshot) {
  const auto cfg = write("small.json", kSmall);
  const fs::path run = dir_ / "run";
  ASSERT_EQ(cli("train --config " + cfg.string() + " --out " + run.string()).status, 0);
  fs::remove_all(run / "snapshots" / "hard");
  const Invocation g = cli("grid " + run.string());
  EXPECT_NE(g.status, 0);
  EXPECT_NE(g.output.find("missing snapshot 'hard'"), std::string::npos) << g.output;
}

TEST_F(CliTest, ExportNeedsLogs) {
  EXPECT_NE(cli("export " + (dir_ / "nothing").string()).status, 0);
}

TEST_F(CliTest, SubcommandIsRequired) { EXPECT_NE(cli("").status, 0); }

}  // namespace
