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
#include <vector>

#include <json.hpp>

#include "structprune/dataset.hpp"
#include "structprune/manifest.hpp"
#include "structprune/metrics.hpp"
#include "structprune/schedules.hpp"
#include "structprune/sparsity.hpp"

namespace structprune {

/// SGD-with-momentum training settings for one phase.
struct TrainOptions {
  int epochs = 10;
  Index batch_size = 32;
  double lr0 = 0.05;
  std::int64_t warmup_batches = -1;  // -1: one epoch
  std::int64_t total_batches = -1;   // -1: epochs * batches per epoch
  double lr_min = 0.0;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double clip_norm = 10.0;  // global norm cap on the task gradient; 0 disables
  MixupConfig mixup;
};

enum class CombinedStrategy { Sequential, Joint };

struct LayerConstraint {
  Index layer = 0;
  SparsityConstraint constraint;
};

/// How to prune: ADMM pre-pruning length, penalty, retraining length and
/// one constraint per prunable layer.
struct PruneSchedule {
  int admm_iterations = 9;
  int epochs_per_iteration = 1;
  int retrain_epochs = 3;
  double rho = 1e-3;
  CombinedStrategy combined_strategy = CombinedStrategy::Sequential;
  std::vector<LayerConstraint> constraints;
  TrainOptions admm_train;
  TrainOptions retrain;

  /// Counts >= 1, rho > 0, constraints in range and covering every prunable
  /// layer exactly once.
  void validate(const LayerManifest& manifest) const;
};

/// Pruning targets as written in a config: a mode plus retention ratios
/// (fraction kept, e.g. 0.5 for 2x) or per-layer absolute counts.
struct PruneTargets {
  SparsityMode mode = SparsityMode::Combined;
  double keep_filters = 1.0;
  double keep_columns = 1.0;
  double keep_weights = 1.0;
  std::vector<std::pair<Index, SparsityConstraint>> overrides;
};

std::vector<LayerConstraint> resolve_constraints(const LayerManifest& manifest, const PruneTargets& targets);

struct DataOptions {
  Index train_count = 2000;
  Index test_count = 500;
  Index image_size = 0;  // 0: task default
};

struct EvalOptions {
  ApInterpolation interpolation = ApInterpolation::AllPoint;
  double score_threshold = 0.05;
  double nms_iou = 0.45;
};

struct RunConfig {
  TaskKind task = TaskKind::Classification;
  std::uint64_t seed = 1;
  DataOptions data;
  Index width = 0;  // 0: task default
  TrainOptions train;
  PruneTargets targets;
  PruneSchedule schedule;
  EvalOptions eval;
  std::vector<AnchorSize> anchors;  // detection; empty: k-means on training boxes
  nlohmann::json source = nlohmann::json::object();
};

/// Parses a config document; unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// The fully resolved configuration, embedded in reports and archives.
nlohmann::json config_to_json(const RunConfig& c);

}  // namespace structprune
