// Copyright 2026 The structprune Authors. All Rights Reserved.
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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "structprune/archive.hpp"
#include "structprune/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// One scratch directory per test so ctest may run them in parallel.
fs::path workdir() {
  return fs::temp_directory_path() / "structprune_cli_test" /
         ::testing::UnitTest::GetInstance()->current_test_info()->name();
}

int run(const std::string& args) {
  const std::string cmd = std::string(STRUCTPRUNE_CLI) + " " + args + " > " + (workdir() / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write_config(const std::string& name, const json& j) {
  const auto p = workdir() / name;
  std::ofstream(p) << j.dump();
  return p;
}

json small_classifier() {
  return json::parse(R"({
    "task": "classification", "width": 8, "data": {"train_count": 256, "test_count": 64},
    "train": {"epochs": 3, "batch_size": 32},
    "prune": {"mode": "combined", "keep_filters": 0.5, "keep_columns": 0.5, "admm_iterations": 2,
              "admm_train": {"epochs": 1, "batch_size": 32}, "retrain": {"epochs": 1, "batch_size": 32}}
  })");
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    fs::remove_all(workdir());
    fs::create_directories(workdir());
  }
};

}  // namespace

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("train"), 1);  // --out is required
  EXPECT_EQ(run("train --out x --bogus"), 1);
  EXPECT_EQ(run("train --config /nonexistent.json --out " + q(workdir() / "x")), 1);
  EXPECT_EQ(run("prune --model /nonexistent --out " + q(workdir() / "x")), 1);
  EXPECT_EQ(run("report"), 1);
  EXPECT_EQ(run("eval --truth /nonexistent.jsonl"), 1);
  const auto bad = write_config("unknown_key.json", json{{"task", "classification"}, {"colour", "blue"}});
  EXPECT_EQ(run("train --config " + q(bad) + " --out " + q(workdir() / "x")), 1);
  const auto bad_mode = write_config("bad_mode.json", json{{"prune", {{"mode", "diagonal"}}}});
  EXPECT_EQ(run("train --config " + q(bad_mode) + " --out " + q(workdir() / "x")), 1);
}

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(run("--help"), 0); }

TEST_F(Cli, PipelineFailuresExitTwo) {
  auto cfg = small_classifier();
  cfg["train"]["lr0"] = 1e30;
  cfg["train"]["warmup_batches"] = 0;
  cfg["train"]["clip_norm"] = 0;
  EXPECT_EQ(run("train --config " + q(write_config("diverge.json", cfg)) + " --seed 1 --out " + q(workdir() / "div")), 2);

  const auto broken = workdir() / "broken_model";
  fs::create_directories(broken);
  std::ofstream(broken / "model.json") << "{\"format\": \"something else\"}";
  EXPECT_EQ(run("prune --model " + q(broken) + " --out " + q(workdir() / "y")), 2);
}

TEST_F(Cli, TrainPruneEvalReport) {
  const auto cfg = q(write_config("small.json", small_classifier()));
  const auto train = workdir() / "train", prune = workdir() / "prune";
  ASSERT_EQ(run("train --config " + cfg + " --seed 4 --out " + q(train)), 0) << slurp(workdir() / "last.log");
  ASSERT_TRUE(fs::exists(train / "model" / "weights.bin"));
  ASSERT_EQ(run("prune --config " + cfg + " --seed 4 --model " + q(train / "model") + " --out " + q(prune)), 0)
      << slurp(workdir() / "last.log");
  for (const char* f : {"report.json", "report.txt", "progress.log", "model/model.json"})
    EXPECT_TRUE(fs::exists(prune / f)) << f;
  EXPECT_TRUE(fs::exists(prune / "checkpoints" / "mapped"));
  EXPECT_TRUE(fs::exists(prune / "checkpoints" / "retrained"));

  const auto report = json::parse(slurp(prune / "report.json"));
  EXPECT_TRUE(report.at("feasible").get<bool>());
  EXPECT_GE(report.at("pruned_ratio").get<double>(), 4.0);
  const auto archive = structprune::load_archive(prune / "model");
  EXPECT_TRUE(archive.compaction_eligible());

  const auto log = slurp(prune / "progress.log");
  EXPECT_NE(log.find("iter=1 loss="), std::string::npos);
  EXPECT_NE(log.find("residual["), std::string::npos);

  ASSERT_EQ(run("eval --model " + q(prune / "model") + " --out " + q(workdir() / "eval")), 0);
  EXPECT_TRUE(json::parse(slurp(workdir() / "eval" / "eval.json")).contains("accuracy"));

  ASSERT_EQ(run("report --from " + q(prune / "report.json")), 0);
  EXPECT_EQ(slurp(workdir() / "last.log"), slurp(prune / "report.txt"));
  ASSERT_EQ(run("report --model " + q(prune / "model")), 0);
  EXPECT_NE(slurp(workdir() / "last.log").find("Compression summary"), std::string::npos);
}

TEST_F(Cli, IdentityScheduleReportsUnitRatio) {
  auto cfg = small_classifier();
  cfg["prune"]["keep_filters"] = 1.0;
  cfg["prune"]["keep_columns"] = 1.0;
  const auto path = q(write_config("identity.json", cfg));
  const auto train = workdir() / "id_train", prune = workdir() / "id_prune";
  ASSERT_EQ(run("train --config " + path + " --seed 2 --out " + q(train)), 0);
  ASSERT_EQ(run("prune --config " + path + " --seed 2 --model " + q(train / "model") + " --out " + q(prune)), 0);
  const auto report = json::parse(slurp(prune / "report.json"));
  EXPECT_DOUBLE_EQ(report.at("ratio").get<double>(), 1.0);
  EXPECT_NE(slurp(prune / "report.txt").find("1.00x"), std::string::npos);
}

TEST_F(Cli, SameSeedGivesIdenticalBytes) {
  const auto cfg = q(write_config("repeat.json", small_classifier()));
  std::string blobs[2], reports[2];
  for (int k = 0; k < 2; ++k) {
    const auto dir = workdir() / ("repeat_run" + std::to_string(k));
    ASSERT_EQ(run("train --config " + cfg + " --seed 9 --out " + q(dir / "t")), 0);
    ASSERT_EQ(run("prune --config " + cfg + " --seed 9 --model " + q(dir / "t" / "model") + " --out " + q(dir / "p")), 0);
    blobs[k] = slurp(dir / "p" / "model" / "weights.bin") + slurp(dir / "p" / "model" / "masks.bin");
    reports[k] = slurp(dir / "p" / "report.json");
  }
  EXPECT_FALSE(blobs[0].empty());
  EXPECT_EQ(blobs[0], blobs[1]);
  EXPECT_EQ(reports[0], reports[1]);
}

TEST_F(Cli, EvalPerfectAndEmptyPredictions) {
  const auto truth = workdir() / "truth.jsonl", perfect = workdir() / "perfect.jsonl", empty = workdir() / "empty.jsonl";
  std::vector<structprune::ImageBoxes> t = {{"a", {{0, 0, 10, 10, 1}, {20, 20, 40, 30, 1}}}, {"b", {{5, 5, 15, 25, 1}}}};
  structprune::write_boxes_jsonl(truth, t, false);
  structprune::write_boxes_jsonl(perfect, t, true);
  std::ofstream(empty).close();

  ASSERT_EQ(run("eval --predictions " + q(perfect) + " --truth " + q(truth) + " --out " + q(workdir() / "ev1")), 0);
  auto j = json::parse(slurp(workdir() / "ev1" / "eval.json"));
  ASSERT_EQ(j.at("map").size(), 8u);
  for (double v : j.at("map")) EXPECT_DOUBLE_EQ(v, 1.0);

  ASSERT_EQ(run("eval --predictions " + q(empty) + " --truth " + q(truth) + " --out " + q(workdir() / "ev0")), 0);
  j = json::parse(slurp(workdir() / "ev0" / "eval.json"));
  for (double v : j.at("map")) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST_F(Cli, DetectionSynthAnchorsTrainPrune) {
  const auto cfg = q(write_config("det.json", json::parse(R"({
    "task": "detection", "data": {"train_count": 128, "test_count": 32},
    "train": {"epochs": 2, "batch_size": 16},
    "prune": {"mode": "filter", "keep_filters": 0.5, "admm_iterations": 1,
              "admm_train": {"epochs": 1, "batch_size": 16}, "retrain": {"epochs": 1, "batch_size": 16}}
  })")));
  const auto data = workdir() / "det_data";
  ASSERT_EQ(run("synth --config " + cfg + " --seed 3 --out " + q(data)), 0);
  ASSERT_EQ(run("anchors --data " + q(data) + " --k 9 --out " + q(workdir() / "anchors")), 0);
  const auto anchors = json::parse(slurp(workdir() / "anchors" / "anchors.json"));
  EXPECT_EQ(anchors.at("anchors").size(), 9u);
  EXPECT_EQ(anchors.at("scales").size(), 3u);
  EXPECT_EQ(run("anchors --truth " + q(data / "train" / "boxes.jsonl") + " --k 100000"), 1);

  const auto train = workdir() / "det_train", prune = workdir() / "det_prune";
  ASSERT_EQ(run("train --config " + cfg + " --seed 3 --data " + q(data) + " --out " + q(train)), 0)
      << slurp(workdir() / "last.log");
  ASSERT_EQ(run("prune --config " + cfg + " --seed 3 --data " + q(data) + " --model " + q(train / "model") + " --out " +
                q(prune)),
            0)
      << slurp(workdir() / "last.log");
  EXPECT_TRUE(fs::exists(prune / "predictions.jsonl"));
  ASSERT_EQ(run("eval --predictions " + q(prune / "predictions.jsonl") + " --truth " + q(data / "test" / "boxes.jsonl") +
                " --out " + q(workdir() / "det_eval")),
            0);
  const auto j = json::parse(slurp(workdir() / "det_eval" / "eval.json"));
  const auto report = json::parse(slurp(prune / "report.json"));
  // Re-scoring the written predictions reproduces the report's numbers.
  EXPECT_EQ(j.at("map"), report.at("eval_after").at("map_sweep").at("map"));
}

TEST_F(Cli, ReportSelfTest) {
  ASSERT_EQ(run("report --self-test"), 0);
  const auto out = slurp(workdir() / "last.log");
  EXPECT_EQ(out.find("FAIL"), std::string::npos);
  EXPECT_NE(out.find("PASS"), std::string::npos);
}
