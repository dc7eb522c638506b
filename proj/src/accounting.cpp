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

#include "structprune/accounting.hpp"

#include <cmath>

namespace structprune {

namespace {

std::uint64_t retained_weights(const LayerDescriptor& l, Index index, const LayerMasks& masks) {
  if (auto it = masks.find(index); it != masks.end()) return static_cast<std::uint64_t>(it->second.popcount());
  return static_cast<std::uint64_t>(l.weight_shape().size());
}

std::vector<Index> all_conv(const LayerManifest& m) { return m.conv_layers(); }

}  // namespace

void check_masks(const LayerManifest& manifest, const LayerMasks& masks) {
  for (const auto& [index, mask] : masks) {
    if (index < 0 || index >= static_cast<Index>(manifest.layers.size()) ||
        manifest.layers[index].kind != LayerKind::Conv)
      throw ShapeMismatch("mask refers to layer " + std::to_string(index) + ", which is not a conv layer");
    const auto s = manifest.layers[index].weight_shape();
    if (mask.rows() != s.filters || mask.cols() != s.gemm_cols())
      throw ShapeMismatch("mask for layer " + std::to_string(index) + " is " + std::to_string(mask.rows()) + "x" +
                          std::to_string(mask.cols()) + ", weight GEMM view is " + std::to_string(s.filters) + "x" +
                          std::to_string(s.gemm_cols()));
  }
}

std::uint64_t count_params(const LayerManifest& manifest, const std::vector<Index>& layers, const LayerMasks& masks) {
  check_masks(manifest, masks);
  std::uint64_t total = 0;
  for (Index i : layers) {
    const auto& l = manifest.layers.at(i);
    if (l.kind == LayerKind::Conv) total += retained_weights(l, i, masks);
  }
  return total;
}

std::uint64_t count_params(const LayerManifest& manifest, const LayerMasks& masks) {
  return count_params(manifest, all_conv(manifest), masks);
}

std::uint64_t count_flops(const LayerManifest& manifest, const std::vector<Index>& layers, const LayerMasks& masks) {
  check_masks(manifest, masks);
  std::uint64_t total = 0;
  for (Index i : layers) {
    const auto& l = manifest.layers.at(i);
    if (l.kind != LayerKind::Conv) continue;
    if (l.H_out < 1 || l.W_out < 1)
      throw ManifestInconsistency("layer " + std::to_string(i) + " (conv): missing H_out/W_out for FLOP count");
    total += 2 * retained_weights(l, i, masks) * static_cast<std::uint64_t>(l.H_out * l.W_out);
  }
  return total;
}

std::uint64_t count_flops(const LayerManifest& manifest, const LayerMasks& masks) {
  return count_flops(manifest, all_conv(manifest), masks);
}

bool CrossCheck::pass() const { return std::abs(computed - reference) <= tolerance * std::abs(reference); }

std::vector<CrossCheck> reference_cross_checks(const LayerManifest* yolov3) {
  constexpr double kParamsBefore = 61.5e6;
  constexpr double kParamsAfter = 1.7e6;
  std::vector<CrossCheck> checks = {
      {"storage before (MB) = 61.5M params x 4 B", static_cast<double>(storage_bytes(61'500'000)) / 1e6, 246.4, 0.01},
      {"storage after (MB) = 1.7M params x 4 B", static_cast<double>(storage_bytes(1'700'000)) / 1e6, 6.84, 0.01},
      {"overall ratio = 61.5M / 1.7M", kParamsBefore / kParamsAfter, 36.0, 0.01},
      {"storage ratio = 246.4 MB / 6.84 MB", 246.4 / 6.84, 36.02, 0.01},
  };
  if (yolov3) {
    checks.push_back({"YOLOv3-320 manifest dense params (M)", static_cast<double>(count_params(*yolov3)) / 1e6, 61.5, 0.01});
    checks.push_back({"YOLOv3-320 manifest dense FLOPs (Bn)", static_cast<double>(count_flops(*yolov3)) / 1e9, 38.63, 0.01});
  }
  return checks;
}

std::string bundled_yolov3_manifest_path() { return std::string(STRUCTPRUNE_DATA_DIR) + "/yolov3_320_1class.json"; }

}  // namespace structprune
