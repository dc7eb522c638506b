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

#include <cmath>
#include <vector>

#include "structprune/loss.hpp"
#include "structprune/metrics.hpp"

namespace structprune {

/// Ground-truth box with a mixup weight (1 for unmixed samples).
struct WeightedBox {
  BoundingBox box;
  double weight = 1.0;
};

/// Channel layout of the detection head: for anchor a, channels
/// a*6 + {0: tx, 1: ty, 2: tw, 3: th, 4: objectness, 5: class}.
inline constexpr Index kValuesPerAnchor = 6;

struct DetectionTarget {
  Index cell_x = 0;
  Index cell_y = 0;
  Index anchor = 0;
  double tx = 0, ty = 0, tw = 0, th = 0;
  double weight = 1.0;
};

/// Assigns each truth to the grid cell holding its center and to the anchor
/// of best shape IoU. When two truths land on the same slot the heavier one
/// (then the earlier one) wins.
std::vector<DetectionTarget> assign_targets(const std::vector<WeightedBox>& truths,
                                            const std::vector<AnchorSize>& anchors, double stride, Index grid_h,
                                            Index grid_w);

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace detail

/// Detection loss on the raw head output (18 x batch*N*N), mean over batch:
///  - assigned slots: squared error of (sigmoid(tx), sigmoid(ty), tw, th)
///    against the offsets, plus BCE(objectness, 1) and BCE(class, 1), all
///    scaled by the truth weight;
///  - every other slot: BCE(objectness, 0).
template <typename Scalar>
LossGrad<Scalar> detection_loss(const FeatureMap<Scalar>& head, const std::vector<std::vector<WeightedBox>>& truths,
                                const std::vector<AnchorSize>& anchors, double stride) {
  const Index n_anchors = static_cast<Index>(anchors.size());
  if (head.channels != n_anchors * kValuesPerAnchor) throw ShapeMismatch("head channels do not match anchors");
  if (static_cast<Index>(truths.size()) != head.batch) throw ShapeMismatch("one truth list per image is required");
  const double inv_batch = 1.0 / static_cast<double>(head.batch);
  LossGrad<Scalar> out{0.0, FeatureMap<Scalar>::zeros(head.batch, head.channels, head.height, head.width)};
  std::vector<char> positive(static_cast<std::size_t>(n_anchors * head.batch * head.pixels()), 0);

  for (Index b = 0; b < head.batch; ++b) {
    for (const auto& t : assign_targets(truths[b], anchors, stride, head.height, head.width)) {
      const Index base = t.anchor * kValuesPerAnchor;
      const auto val = [&](Index ch) { return static_cast<double>(head.at(b, base + ch, t.cell_y, t.cell_x)); };
      auto grad = [&](Index ch) -> Scalar& { return out.grad.at(b, base + ch, t.cell_y, t.cell_x); };
      positive[(t.anchor * head.batch + b) * head.pixels() + t.cell_y * head.width + t.cell_x] = 1;
      const double w = t.weight * inv_batch;

      const double sx = detail::sigmoid(val(0)), sy = detail::sigmoid(val(1));
      out.loss += w * ((sx - t.tx) * (sx - t.tx) + (sy - t.ty) * (sy - t.ty));
      grad(0) = static_cast<Scalar>(w * 2.0 * (sx - t.tx) * sx * (1.0 - sx));
      grad(1) = static_cast<Scalar>(w * 2.0 * (sy - t.ty) * sy * (1.0 - sy));
      out.loss += w * ((val(2) - t.tw) * (val(2) - t.tw) + (val(3) - t.th) * (val(3) - t.th));
      grad(2) = static_cast<Scalar>(w * 2.0 * (val(2) - t.tw));
      grad(3) = static_cast<Scalar>(w * 2.0 * (val(3) - t.th));
      for (Index ch : {Index{4}, Index{5}}) {
        out.loss += w * (detail::softplus(val(ch)) - val(ch));
        grad(ch) = static_cast<Scalar>(w * (detail::sigmoid(val(ch)) - 1.0));
      }
    }
  }

  for (Index a = 0; a < n_anchors; ++a)
    for (Index b = 0; b < head.batch; ++b)
      for (Index y = 0; y < head.height; ++y)
        for (Index x = 0; x < head.width; ++x) {
          if (positive[(a * head.batch + b) * head.pixels() + y * head.width + x]) continue;
          const double z = static_cast<double>(head.at(b, a * kValuesPerAnchor + 4, y, x));
          out.loss += inv_batch * detail::softplus(z);
          out.grad.at(b, a * kValuesPerAnchor + 4, y, x) = static_cast<Scalar>(inv_batch * detail::sigmoid(z));
        }
  return out;
}

struct DecodeOptions {
  double score_threshold = 0.05;
  double nms_iou = 0.45;
  std::size_t max_boxes = 20;
};

/// Converts the head output of one image into scored boxes: center
/// (cell + sigmoid(t)) * stride, size anchor * exp(t), score
/// sigmoid(objectness) * sigmoid(class), followed by greedy NMS.
std::vector<BoundingBox> decode_detections(const FeatureMap<float>& head, Index image,
                                           const std::vector<AnchorSize>& anchors, double stride,
                                           const DecodeOptions& options = {});

/// Greedy non-maximum suppression; keeps input order among equal scores.
std::vector<BoundingBox> non_max_suppression(std::vector<BoundingBox> boxes, double iou_threshold,
                                             std::size_t max_boxes);

}  // namespace structprune
