// Copyright 2026 The p4d Authors
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

#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "p4d/cli.hpp"
#include "p4d/io.hpp"

namespace p4d {
namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("p4d_cli_" + std::to_string(::getpid()) + "_" +
                                         ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  std::string at(const std::string& name) const { return (root_ / name).string(); }

  fs::path root_;
};

TEST_F(CliTest, OracleChainScoresPerfectly) {
  ASSERT_EQ(run({"synth", "--output", at("seq"), "--frames", "8"}).code, cli::kOk);
  const Result pl = run({"pseudo-label", at("seq"), "--output", at("raw")});
  ASSERT_EQ(pl.code, cli::kOk) << pl.err;
  EXPECT_NE(pl.out.find("frames=8"), std::string::npos);
  ASSERT_EQ(run({"classify", at("raw"), "--prompts", at("seq/prompts.bin"), "--output", at("cls")}).code, cli::kOk);
  const Result ev = run({"evaluate", at("cls"), "--gt", at("seq"), "--output", at("report.txt")});
  ASSERT_EQ(ev.code, cli::kOk) << ev.err;
  EXPECT_EQ(ev.out.rfind("lstq=1.000000000\n", 0), 0u);
  EXPECT_EQ(read_file(at("report.txt")), ev.out);
  EXPECT_EQ(run({"validate", at("cls"), "--gt", at("seq")}).code, cli::kOk);
}

TEST_F(CliTest, BaselinesRunOnSingleScanLabels) {
  ASSERT_EQ(run({"synth", "--output", at("seq"), "--scene", "crossing", "--frames", "6"}).code, cli::kOk);
  ASSERT_EQ(run({"single-scan", at("seq"), "--output", at("det")}).code, cli::kOk);
  for (const char* m : {"sw", "mot", "vis"}) {
    const Result r = run({"baseline", m, at("seq"), "--detections", at("det"), "--output", at(std::string("b_") + m)});
    EXPECT_EQ(r.code, cli::kOk) << m << r.err;
    EXPECT_EQ(r.out.find("vis_ties=") != std::string::npos, std::string(m) == "vis");
    EXPECT_EQ(run({"validate", at(std::string("b_") + m)}).code, cli::kOk);
  }
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run({"synth"}).code, cli::kUsage);
  EXPECT_EQ(run({"synth", "--output", at("x"), "--scene", "forest"}).code, cli::kBadInput);
  EXPECT_EQ(run({"pseudo-label", at("missing"), "--output", at("out")}).code, cli::kBadInput);
  EXPECT_EQ(run({"validate"}).code, cli::kBadInput);

  GroundTruthSequence gt;
  gt.vocabulary = {"road", "car"};
  gt.things = {2};
  gt.classes = {{1, 2}};
  gt.instances = {{4, 1}};  // instance id on a stuff point
  write_ground_truth(root_ / "bad", gt);
  const Result r = run({"validate", "--gt", at("bad")});
  EXPECT_EQ(r.code, cli::kInvalid);
  EXPECT_NE(r.err.find("validation failed"), std::string::npos);
}

TEST_F(CliTest, EvaluateReportsFrameMismatch) {
  ASSERT_EQ(run({"synth", "--output", at("a"), "--frames", "4", "--window-size", "4", "--stride", "2"}).code, cli::kOk);
  ASSERT_EQ(run({"synth", "--output", at("b"), "--frames", "5"}).code, cli::kOk);
  ASSERT_EQ(run({"pseudo-label", at("a"), "--output", at("la"), "--window-size", "4", "--stride", "2"}).code, cli::kOk);
  const Result r = run({"evaluate", at("la"), "--gt", at("b"), "--class-agnostic"});
  EXPECT_EQ(r.code, cli::kBadInput);
  EXPECT_NE(r.err.find("frame 4: present in the ground truth only"), std::string::npos) << r.err;
}

TEST_F(CliTest, ConfigFileIsApplied) {
  write_file(at("bad.cfg"), "window.k = 0\n");
  EXPECT_EQ(run({"pseudo-label", at("seq"), "--output", at("o"), "--config", at("bad.cfg")}).code, cli::kBadInput);
  write_file(at("ok.cfg"), "window.k = 4\nbogus = 1\n");
  ASSERT_EQ(run({"synth", "--output", at("seq"), "--frames", "4", "--config", at("ok.cfg")}).code, cli::kOk);
  const Result r = run({"pseudo-label", at("seq"), "--output", at("o"), "--config", at("ok.cfg")});
  EXPECT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.err.find("bogus"), std::string::npos);
  EXPECT_NE(r.out.find("windows=2"), std::string::npos);
}

}  // namespace
}  // namespace p4d
