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

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "structprune/tensor.hpp"

namespace structprune {

enum class LayerKind { Input, Conv, Pool, Upsample, Shortcut, Route, Detect };
enum class Activation { Linear, Relu, Leaky };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);

/// One entry of an architecture manifest. For conv layers F/C/KH/KW describe
/// the weight tensor; for every kind F, H_out and W_out describe the output
/// feature map. `from` lists absolute source layer indices for shortcut and
/// route layers (and optionally for conv, to read from a non-adjacent layer).
struct LayerDescriptor {
  LayerKind kind = LayerKind::Conv;
  Index F = 1;
  Index C = 1;
  Index KH = 1;
  Index KW = 1;
  Index stride = 1;
  Index pad = 0;
  Index H_out = 0;
  Index W_out = 0;
  bool prunable = false;
  Activation activation = Activation::Linear;
  std::vector<Index> from;

  WeightShape weight_shape() const { return {F, C, KH, KW}; }
  bool operator==(const LayerDescriptor&) const = default;
};

struct LayerManifest {
  std::vector<LayerDescriptor> layers;

  std::vector<Index> conv_layers() const;
  std::vector<Index> prunable_layers() const;
  bool operator==(const LayerManifest&) const = default;
};

/// Throws ManifestInconsistency naming the first offending layer.
void validate(const LayerManifest& manifest);

LayerManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const LayerManifest& manifest);

/// Reads, parses and validates a JSON manifest (an array of descriptors).
LayerManifest load_manifest(const std::filesystem::path& path);

/// Conv stack + global pooling + 1x1 classifier head.
LayerManifest tiny_classifier_manifest(Index image_size = 16, Index in_channels = 1, Index classes = 4,
                                       Index width = 16);

/// Strided conv stack with a single 18-channel detection head (3 anchors,
/// 4 box offsets + objectness + 1 class). The grid is image_size / 2^downsamples.
LayerManifest tiny_detect_manifest(Index image_size = 64, Index in_channels = 1, Index downsamples = 3,
                                   Index width = 8);

inline constexpr Index kAnchorsPerScale = 3;
inline constexpr Index kDetectClasses = 1;
inline constexpr Index kDetectChannels = kAnchorsPerScale * (4 + 1 + kDetectClasses);

}  // namespace structprune
