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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace structprune {

/// Axis-aligned box in pixels. `score` is only meaningful for predictions.
struct BoundingBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;
  double score = 1.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_max >= x_min && y_max >= y_min; }
};

struct ImageBoxes {
  std::string image_id;
  std::vector<BoundingBox> boxes;
};

/// Intersection over union; 0 for disjoint or zero-area unions.
double iou(const BoundingBox& a, const BoundingBox& b);

enum class ApInterpolation { AllPoint, ElevenPoint };

std::string to_string(ApInterpolation interp);
ApInterpolation parse_ap_interpolation(const std::string& s);

/// Greedy matching for one image: predictions in descending score order
/// (ties: input order) each take the unmatched truth of highest IoU (ties:
/// lower index), counted only when IoU > threshold. Returns one flag per
/// prediction in that sorted order, and the sorted scores.
struct MatchResult {
  std::vector<double> scores;
  std::vector<bool> true_positive;
};
MatchResult greedy_match(const std::vector<BoundingBox>& preds, const std::vector<BoundingBox>& truths,
                         double threshold);

/// Average precision for one image. No truths and no predictions gives 1;
/// no truths but some predictions gives 0.
double average_precision(const std::vector<BoundingBox>& preds, const std::vector<BoundingBox>& truths,
                         double threshold, ApInterpolation interp = ApInterpolation::AllPoint);

/// Mean over the images listed in `truths` of the per-image AP. Predictions
/// for images absent from `truths` are an error; truth images without a
/// prediction record have no predictions.
double map_at(const std::vector<ImageBoxes>& preds, const std::vector<ImageBoxes>& truths, double threshold,
              ApInterpolation interp = ApInterpolation::AllPoint);

/// {0.40, 0.45, ..., 0.75}
std::vector<double> default_iou_thresholds();

struct EvalSweep {
  std::vector<double> thresholds;
  std::vector<double> map;
  ApInterpolation interpolation = ApInterpolation::AllPoint;

  double at(double threshold) const;
};

EvalSweep map_sweep(const std::vector<ImageBoxes>& preds, const std::vector<ImageBoxes>& truths,
                    const std::vector<double>& thresholds = default_iou_thresholds(),
                    ApInterpolation interp = ApInterpolation::AllPoint);

struct AnchorSize {
  double w = 0;
  double h = 0;
  bool operator==(const AnchorSize&) const = default;
};

enum class AnchorDistance { OneMinusIou, Euclidean };

/// k-means over box sizes. The default distance is 1 - IoU of the two sizes
/// placed at a common corner. Centers are returned sorted by area (then
/// width) ascending. Empty clusters are re-seeded from the point farthest
/// from its current center.
std::vector<AnchorSize> kmeans_anchors(const std::vector<AnchorSize>& boxes, std::size_t k, std::uint64_t seed,
                                       AnchorDistance distance = AnchorDistance::OneMinusIou,
                                       int max_iterations = 300);

/// 1 - IoU of two corner-aligned sizes.
double anchor_distance(const AnchorSize& a, const AnchorSize& b);

/// Reference anchor priors for a 320x320 single-class detector, sorted by area.
std::vector<AnchorSize> reference_anchors();

/// JSON lines: {"image_id": ..., "boxes": [[x_min, y_min, x_max, y_max, score?], ...]}
std::vector<ImageBoxes> read_boxes_jsonl(const std::filesystem::path& path);
void write_boxes_jsonl(const std::filesystem::path& path, const std::vector<ImageBoxes>& images, bool with_scores);

}  // namespace structprune
