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

#include "structprune/detection.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace structprune {

std::vector<DetectionTarget> assign_targets(const std::vector<WeightedBox>& truths,
                                            const std::vector<AnchorSize>& anchors, double stride, Index grid_h,
                                            Index grid_w) {
  std::map<std::tuple<Index, Index, Index>, DetectionTarget> slots;
  for (const auto& t : truths) {
    const double w = t.box.width(), h = t.box.height();
    if (!(w > 0 && h > 0)) continue;
    const double cx = 0.5 * (t.box.x_min + t.box.x_max) / stride;
    const double cy = 0.5 * (t.box.y_min + t.box.y_max) / stride;
    DetectionTarget d;
    d.cell_x = std::clamp<Index>(static_cast<Index>(std::floor(cx)), 0, grid_w - 1);
    d.cell_y = std::clamp<Index>(static_cast<Index>(std::floor(cy)), 0, grid_h - 1);
    double best = -1;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const double s = 1.0 - anchor_distance({w, h}, anchors[a]);
      if (s > best) {
        best = s;
        d.anchor = static_cast<Index>(a);
      }
    }
    d.tx = std::clamp(cx - static_cast<double>(d.cell_x), 0.0, 1.0);
    d.ty = std::clamp(cy - static_cast<double>(d.cell_y), 0.0, 1.0);
    d.tw = std::log(w / anchors[d.anchor].w);
    d.th = std::log(h / anchors[d.anchor].h);
    d.weight = t.weight;
    auto key = std::make_tuple(d.anchor, d.cell_y, d.cell_x);
    auto it = slots.find(key);
    if (it == slots.end() || it->second.weight < d.weight) slots[key] = d;
  }
  std::vector<DetectionTarget> out;
  for (auto& [key, d] : slots) out.push_back(d);
  return out;
}

std::vector<BoundingBox> non_max_suppression(std::vector<BoundingBox> boxes, double iou_threshold,
                                             std::size_t max_boxes) {
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const BoundingBox& a, const BoundingBox& b) { return a.score > b.score; });
  std::vector<BoundingBox> kept;
  for (const auto& b : boxes) {
    if (kept.size() >= max_boxes) break;
    bool suppressed = false;
    for (const auto& k : kept)
      if (iou(k, b) > iou_threshold) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(b);
  }
  return kept;
}

std::vector<BoundingBox> decode_detections(const FeatureMap<float>& head, Index image,
                                           const std::vector<AnchorSize>& anchors, double stride,
                                           const DecodeOptions& options) {
  if (head.channels != static_cast<Index>(anchors.size()) * kValuesPerAnchor)
    throw ShapeMismatch("head channels do not match anchors");
  std::vector<BoundingBox> boxes;
  for (Index a = 0; a < static_cast<Index>(anchors.size()); ++a)
    for (Index y = 0; y < head.height; ++y)
      for (Index x = 0; x < head.width; ++x) {
        const auto v = [&](Index ch) { return static_cast<double>(head.at(image, a * kValuesPerAnchor + ch, y, x)); };
        const double score = detail::sigmoid(v(4)) * detail::sigmoid(v(5));
        if (score < options.score_threshold) continue;
        const double cx = (static_cast<double>(x) + detail::sigmoid(v(0))) * stride;
        const double cy = (static_cast<double>(y) + detail::sigmoid(v(1))) * stride;
        const double w = anchors[a].w * std::exp(std::min(v(2), 8.0));
        const double h = anchors[a].h * std::exp(std::min(v(3), 8.0));
        boxes.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h, score});
      }
  return non_max_suppression(std::move(boxes), options.nms_iou, options.max_boxes);
}

}  // namespace structprune
