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
#include <map>
#include <string>
#include <vector>

#include "structprune/manifest.hpp"
#include "structprune/sparsity.hpp"

namespace structprune {

using LayerMasks = std::map<Index, SparsityMask>;

inline constexpr std::uint64_t kBytesPerParam = 4;

/// Conv weight count F*C*KH*KW summed over conv layers. A masked layer
/// contributes its mask popcount instead.
std::uint64_t count_params(const LayerManifest& manifest, const LayerMasks& masks = {});

/// Same, restricted to the listed layers.
std::uint64_t count_params(const LayerManifest& manifest, const std::vector<Index>& layers,
                           const LayerMasks& masks = {});

/// 2 * (retained weights) * H_out * W_out summed over conv layers.
std::uint64_t count_flops(const LayerManifest& manifest, const LayerMasks& masks = {});
std::uint64_t count_flops(const LayerManifest& manifest, const std::vector<Index>& layers,
                          const LayerMasks& masks = {});

inline std::uint64_t storage_bytes(std::uint64_t params) { return params * kBytesPerParam; }

/// Checks that every mask refers to a conv layer of matching GEMM shape.
void check_masks(const LayerManifest& manifest, const LayerMasks& masks);

/// A documented arithmetic check against a published figure.
struct CrossCheck {
  std::string name;
  double computed = 0;
  double reference = 0;
  double tolerance = 0;  // relative
  bool pass() const;
};

/// Published compression figures reproduced by arithmetic: storage at 4
/// bytes per parameter, the overall ratio, and the bundled YOLOv3 manifest's
/// dense parameter and FLOP totals.
std::vector<CrossCheck> reference_cross_checks(const LayerManifest* yolov3 = nullptr);

/// Path of the bundled 320x320 single-class YOLOv3 manifest.
std::string bundled_yolov3_manifest_path();

}  // namespace structprune
