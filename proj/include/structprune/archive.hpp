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
#include <vector>

#include <json.hpp>

#include "structprune/accounting.hpp"
#include "structprune/network.hpp"

namespace structprune {

inline constexpr int kArchiveVersion = 1;

/// On-disk model: a directory holding
///   model.json   format tag, version, manifest, meta, mask directory
///   weights.bin  conv weights, little-endian float32, layer order, (F,C,KH,KW)
///   biases.bin   conv biases, little-endian float32, layer order
///   masks.bin    optional; one LSB-first bitmap per masked layer (GEMM
///                row-major), each padded to a whole byte
struct ModelArchive {
  LayerManifest manifest;
  std::vector<float> weights;
  std::vector<float> biases;
  LayerMasks masks;
  nlohmann::json meta = nlohmann::json::object();

  /// True iff there is at least one mask and every mask is structured.
  bool compaction_eligible() const;
  bool operator==(const ModelArchive&) const = default;
};

/// Writes into a sibling temporary directory, then renames over `dir`.
void save_archive(const std::filesystem::path& dir, const ModelArchive& archive);
ModelArchive load_archive(const std::filesystem::path& dir);

ModelArchive archive_from_network(const Network<float>& net, const LayerMasks& masks, nlohmann::json meta);
Network<float> network_from_archive(const ModelArchive& archive);

}  // namespace structprune
