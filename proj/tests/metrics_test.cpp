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

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "structprune/errors.hpp"
#include "structprune/metrics.hpp"

namespace sp = structprune;
using sp::BoundingBox;
using sp::ImageBoxes;

namespace {

struct Scene {
  std::vector<BoundingBox> truths, preds;
};

// Small clustered scenes so that overlaps, ties and near-threshold IoUs occur.
Scene random_scene(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0, 4), size(1, 3), jitter(-0.8, 0.8);
  std::uniform_int_distribution<int> n_truth(0, 3), n_pred(0, 4);
  const double scores[] = {0.2, 0.4, 0.4, 0.7, 0.9};
  std::uniform_int_distribution<int> pick_score(0, 4);
  Scene s;
  for (int i = n_truth(rng); i > 0; --i) {
    const double x = pos(rng), y = pos(rng);
    s.truths.push_back({x, y, x + size(rng), y + size(rng)});
  }
  std::bernoulli_distribution near(0.7);
  for (int i = n_pred(rng); i > 0; --i) {
    BoundingBox b;
    if (!s.truths.empty() && near(rng)) {
      const auto& t = s.truths[std::uniform_int_distribution<std::size_t>(0, s.truths.size() - 1)(rng)];
      b = {t.x_min + jitter(rng), t.y_min + jitter(rng), 0, 0};
      b.x_max = std::max(b.x_min + 0.1, t.x_max + jitter(rng));
      b.y_max = std::max(b.y_min + 0.1, t.y_max + jitter(rng));
    } else {
      const double x = pos(rng), y = pos(rng);
      b = {x, y, x + size(rng), y + size(rng)};
    }
    b.score = scores[pick_score(rng)];
    s.preds.push_back(b);
  }
  return s;
}

}  // namespace

TEST(Iou, HandCases) {
  const BoundingBox unit{0, 0, 1, 1};
  EXPECT_NEAR(sp::iou(unit, unit), 1.0, 1e-9);
  EXPECT_NEAR(sp::iou(unit, {2, 2, 3, 3}), 0.0, 1e-9);
  EXPECT_NEAR(sp::iou(unit, {0.5, 0, 1.5, 1}), 1.0 / 3.0, 1e-9);
  EXPECT_NEAR(sp::iou(unit, {1, 0, 2, 1}), 0.0, 1e-9);
  EXPECT_EQ(sp::iou({0, 0, 0, 0}, {0, 0, 0, 0}), 0.0);
}

TEST(Iou, SymmetricAndBounded) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_scene(rng);
    for (const auto& a : s.preds)
      for (const auto& b : s.truths) {
        const double v = sp::iou(a, b);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        EXPECT_DOUBLE_EQ(v, sp::iou(b, a));
        EXPECT_NEAR(v, oracle::box_iou(a, b), 1e-12);
      }
  }
}

TEST(Thresholds, DefaultSweepIsExact) {
  EXPECT_EQ(sp::default_iou_thresholds(), (std::vector<double>{0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75}));
}

TEST(Map, PerfectPredictionsScoreOneEverywhere) {
  const std::vector<ImageBoxes> truth{{"a", {{0, 0, 4, 4}, {5, 5, 9, 8}}}, {"b", {{1, 1, 2, 3}}}};
  const auto sweep = sp::map_sweep(truth, truth);
  for (double m : sweep.map) EXPECT_DOUBLE_EQ(m, 1.0);
  EXPECT_DOUBLE_EQ(sweep.at(0.5), 1.0);
}

TEST(Map, NoPredictionsScoresZero) {
  const std::vector<ImageBoxes> truth{{"a", {{0, 0, 4, 4}}}};
  for (double m : sp::map_sweep({}, truth).map) EXPECT_DOUBLE_EQ(m, 0.0);
}

TEST(Map, EmptyTruthImages) {
  const std::vector<ImageBoxes> truth{{"a", {}}, {"b", {{0, 0, 1, 1}}}};
  // Image "a": nothing predicted, nothing there -> AP 1.
  EXPECT_DOUBLE_EQ(sp::map_at({{"b", {{0, 0, 1, 1, 0.9}}}}, truth, 0.5), 1.0);
  // A prediction on an empty image scores that image 0.
  EXPECT_DOUBLE_EQ(sp::map_at({{"a", {{0, 0, 1, 1, 0.9}}}, {"b", {{0, 0, 1, 1, 0.9}}}}, truth, 0.5), 0.5);
}

TEST(Map, ThresholdIsStrict) {
  const std::vector<ImageBoxes> truth{{"a", {{0, 0, 1, 1}}}};
  const std::vector<ImageBoxes> pred{{"a", {{0, 0, 0.5, 1, 0.9}}}};  // IoU exactly 0.5
  EXPECT_DOUBLE_EQ(sp::map_at(pred, truth, 0.45), 1.0);
  EXPECT_DOUBLE_EQ(sp::map_at(pred, truth, 0.5), 0.0);
}

TEST(Map, DuplicateDetectionsAreFalsePositives) {
  const std::vector<ImageBoxes> truth{{"a", {{0, 0, 2, 2}}}};
  const std::vector<ImageBoxes> pred{{"a", {{0, 0, 2, 2, 0.6}, {0, 0, 2, 2, 0.9}}}};
  const auto m = sp::greedy_match(pred[0].boxes, truth[0].boxes, 0.5);
  EXPECT_EQ(m.true_positive, (std::vector<bool>{true, false}));
  EXPECT_EQ(m.scores, (std::vector<double>{0.9, 0.6}));
  EXPECT_DOUBLE_EQ(sp::map_at(pred, truth, 0.5), 1.0);
}

TEST(Map, HandComputedAllPointAndElevenPoint) {
  // Ranked TP, FP, TP against 2 truths: P = 1, 1/2, 2/3; R = 1/2, 1/2, 1.
  const std::vector<BoundingBox> truths{{0, 0, 1, 1}, {5, 5, 6, 6}};
  const std::vector<BoundingBox> preds{{0, 0, 1, 1, 0.9}, {10, 10, 11, 11, 0.8}, {5, 5, 6, 6, 0.7}};
  EXPECT_NEAR(sp::average_precision(preds, truths, 0.5, sp::ApInterpolation::AllPoint), 0.5 + 0.5 * 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(sp::average_precision(preds, truths, 0.5, sp::ApInterpolation::ElevenPoint),
              (6 * 1.0 + 5 * 2.0 / 3.0) / 11.0, 1e-12);
}

TEST(Map, MatchesBruteForceMatcher) {
  std::mt19937_64 rng(2);
  int compared = 0;
  for (int i = 0; i < 500; ++i) {
    const auto s = random_scene(rng);
    for (double t : sp::default_iou_thresholds()) {
      const auto want = oracle::brute_force_match(s.preds, s.truths, t);
      const auto got = sp::greedy_match(s.preds, s.truths, t);
      if (!s.preds.empty()) {
        ASSERT_EQ(got.true_positive, want);
      }
      EXPECT_NEAR(sp::average_precision(s.preds, s.truths, t), oracle::brute_force_ap(s.preds, s.truths, t), 1e-12);
      ++compared;
    }
  }
  EXPECT_EQ(compared, 500 * 8);
}

TEST(Map, MonotoneNonIncreasingInThreshold) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    std::vector<ImageBoxes> truths, preds;
    for (int img = 0; img < 4; ++img) {
      const auto s = random_scene(rng);
      truths.push_back({std::to_string(img), s.truths});
      preds.push_back({std::to_string(img), s.preds});
    }
    for (auto interp : {sp::ApInterpolation::AllPoint, sp::ApInterpolation::ElevenPoint}) {
      const auto sweep = sp::map_sweep(preds, truths, sp::default_iou_thresholds(), interp);
      for (std::size_t k = 1; k < sweep.map.size(); ++k) EXPECT_LE(sweep.map[k], sweep.map[k - 1]);
    }
  }
}

TEST(Map, RejectsBadInput) {
  const std::vector<ImageBoxes> truth{{"a", {{0, 0, 1, 1}}}};
  EXPECT_THROW(sp::map_at({{"zz", {}}}, truth, 0.5), sp::InvalidArgument);
  EXPECT_THROW(sp::map_at({}, {truth[0], truth[0]}, 0.5), sp::InvalidArgument);
  EXPECT_THROW(sp::map_at({}, {}, 0.5), sp::InvalidArgument);
  EXPECT_THROW(sp::map_sweep({}, truth, {0.5, 0.5}), sp::InvalidArgument);
  EXPECT_THROW(sp::map_sweep({}, truth, {0.6, 0.5}), sp::InvalidArgument);
  EXPECT_THROW(sp::map_sweep({}, truth, {1.5}), sp::InvalidArgument);
  EXPECT_THROW(sp::parse_ap_interpolation("voc"), sp::InvalidArgument);
}

TEST(Anchors, ReferencePriorsAreSortedByArea) {
  const auto a = sp::reference_anchors();
  ASSERT_EQ(a.size(), 9u);
  EXPECT_DOUBLE_EQ(a.front().w, 40);
  EXPECT_DOUBLE_EQ(a.front().h, 39);
  EXPECT_DOUBLE_EQ(a.back().w, 94);
  EXPECT_DOUBLE_EQ(a.back().h, 202);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(a[i - 1].w * a[i - 1].h, a[i].w * a[i].h);
}

TEST(Anchors, DistanceIsOneMinusCornerAlignedIou) {
  EXPECT_DOUBLE_EQ(sp::anchor_distance({2, 2}, {2, 2}), 0.0);
  EXPECT_NEAR(sp::anchor_distance({2, 2}, {4, 4}), 1.0 - 4.0 / 16.0, 1e-12);
  EXPECT_NEAR(sp::anchor_distance({4, 1}, {1, 4}), 1.0 - 1.0 / 7.0, 1e-12);
}

TEST(Anchors, TwoClustersMatchExhaustivePartition) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<sp::AnchorSize> boxes;
    for (int i = 0; i < 6; ++i) boxes.push_back({10 + n(rng), 10 + n(rng)});
    for (int i = 0; i < 6; ++i) boxes.push_back({80 + n(rng), 40 + n(rng)});
    // Exhaustive search over all 2-partitions for the minimal total distance
    // to the partition means.
    double best = std::numeric_limits<double>::infinity();
    std::vector<sp::AnchorSize> best_centers;
    for (unsigned mask = 1; mask + 1 < (1u << boxes.size()); ++mask) {
      sp::AnchorSize c[2] = {{0, 0}, {0, 0}};
      int cnt[2] = {0, 0};
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        const int side = (mask >> i) & 1u;
        c[side].w += boxes[i].w;
        c[side].h += boxes[i].h;
        ++cnt[side];
      }
      for (int s = 0; s < 2; ++s) c[s] = {c[s].w / cnt[s], c[s].h / cnt[s]};
      double cost = 0;
      for (std::size_t i = 0; i < boxes.size(); ++i) cost += sp::anchor_distance(boxes[i], c[(mask >> i) & 1u]);
      if (cost < best) {
        best = cost;
        best_centers = {c[0], c[1]};
      }
    }
    std::sort(best_centers.begin(), best_centers.end(),
              [](const auto& a, const auto& b) { return a.w * a.h < b.w * b.h; });
    const auto got = sp::kmeans_anchors(boxes, 2, 17 + trial);
    ASSERT_EQ(got.size(), 2u);
    for (int s = 0; s < 2; ++s) {
      EXPECT_NEAR(got[s].w, best_centers[s].w, 1e-9);
      EXPECT_NEAR(got[s].h, best_centers[s].h, 1e-9);
    }
  }
}

TEST(Anchors, ResultIsALloydFixedPoint) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(5, 200);
  std::vector<sp::AnchorSize> boxes;
  for (int i = 0; i < 300; ++i) boxes.push_back({u(rng), u(rng)});
  const auto centers = sp::kmeans_anchors(boxes, 9, 42);
  ASSERT_EQ(centers.size(), 9u);
  std::vector<sp::AnchorSize> sum(9, {0, 0});
  std::vector<int> cnt(9, 0);
  for (const auto& b : boxes) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 9; ++c)
      if (sp::anchor_distance(b, centers[c]) < sp::anchor_distance(b, centers[best])) best = c;
    sum[best].w += b.w;
    sum[best].h += b.h;
    ++cnt[best];
  }
  for (std::size_t c = 0; c < 9; ++c) {
    ASSERT_GT(cnt[c], 0);
    EXPECT_NEAR(centers[c].w, sum[c].w / cnt[c], 1e-9);
    EXPECT_NEAR(centers[c].h, sum[c].h / cnt[c], 1e-9);
    if (c > 0) {
      EXPECT_LE(centers[c - 1].w * centers[c - 1].h, centers[c].w * centers[c].h);
    }
  }
  EXPECT_EQ(sp::kmeans_anchors(boxes, 9, 42).front().w, centers.front().w);
}

TEST(Anchors, RejectsTooFewBoxes) {
  EXPECT_THROW(sp::kmeans_anchors({{1, 1}, {2, 2}}, 3, 1), sp::InvalidArgument);
  EXPECT_THROW(sp::kmeans_anchors({{1, 1}}, 0, 1), sp::InvalidArgument);
  EXPECT_THROW(sp::kmeans_anchors({{0, 1}}, 1, 1), sp::InvalidArgument);
}

TEST(BoxesJsonl, RoundTripAndErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "structprune_metrics_test";
  std::filesystem::create_directories(dir);
  const std::vector<ImageBoxes> imgs{{"x", {{0.5, 1, 2, 3.25, 0.75}}}, {"y", {}}};
  sp::write_boxes_jsonl(dir / "p.jsonl", imgs, true);
  const auto back = sp::read_boxes_jsonl(dir / "p.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].image_id, "x");
  EXPECT_DOUBLE_EQ(back[0].boxes[0].y_max, 3.25);
  EXPECT_DOUBLE_EQ(back[0].boxes[0].score, 0.75);
  EXPECT_TRUE(back[1].boxes.empty());
  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << "{\"image_id\": \"a\", \"boxes\": [[3, 0, 1, 1]]}\n";
  }
  EXPECT_THROW(sp::read_boxes_jsonl(dir / "bad.jsonl"), sp::ParseError);
  EXPECT_THROW(sp::read_boxes_jsonl(dir / "missing.jsonl"), sp::ParseError);
  std::filesystem::remove_all(dir);
}
