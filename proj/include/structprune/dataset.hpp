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
#include <span>
#include <string>
#include <vector>

#include "structprune/metrics.hpp"
#include "structprune/network.hpp"

namespace structprune {

enum class TaskKind { Classification, Detection };

std::string to_string(TaskKind task);
TaskKind parse_task_kind(const std::string& s);

/// Images stored image-major, each in (channel, y, x) order.
struct Dataset {
  TaskKind task = TaskKind::Classification;
  Index channels = 1;
  Index height = 0;
  Index width = 0;
  std::vector<float> images;
  Index classes = 0;                          // classification
  std::vector<int> labels;                    // classification
  std::vector<std::vector<BoundingBox>> boxes;  // detection

  Index size() const { return channels * height * width == 0 ? 0 : static_cast<Index>(images.size()) / (channels * height * width); }
  Index image_size() const { return channels * height * width; }
  std::span<const float> image(Index i) const;

  /// Packs the selected images into a feature map batch.
  FeatureMap<float> batch(std::span<const Index> indices) const;
};

/// Four classes of oriented bars (horizontal, vertical, diagonal,
/// anti-diagonal) at random positions on Gaussian noise.
Dataset make_bar_classification_set(Index count, std::uint64_t seed, Index image_size = 16);

/// One to three bright rectangles on Gaussian noise, with exact boxes.
Dataset make_rectangle_detection_set(Index count, std::uint64_t seed, Index image_size = 64);

/// Ground truth as image records with ids "0", "1", ...
std::vector<ImageBoxes> truth_records(const Dataset& ds);

/// Directory layout: images.bin (little-endian float32), images.json
/// (sidecar with shape, task, labels) and, for detection, boxes.jsonl.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

/// Little-endian float32 blob helpers.
std::vector<float> read_f32_blob(const std::filesystem::path& path);
void write_f32_blob(const std::filesystem::path& path, std::span<const float> data);

}  // namespace structprune
