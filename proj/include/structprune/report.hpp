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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "structprune/accounting.hpp"
#include "structprune/config.hpp"
#include "structprune/metrics.hpp"

namespace structprune {

struct LayerReportRow {
  Index layer = 0;
  std::string mode;
  Index filters = 0, columns = 0;
  Index kept_filters = 0, kept_columns = 0;
  std::uint64_t params_before = 0, params_after = 0;
  double filter_ratio = 1, column_ratio = 1, net_ratio = 1;
};

/// Evaluation of one model: classification accuracy or a detection sweep.
struct EvalSummary {
  std::optional<double> accuracy;
  std::optional<EvalSweep> sweep;
};

struct PruneReport {
  std::string mode;
  std::uint64_t params_before = 0, params_after = 0;
  double ratio = 1;
  std::uint64_t pruned_params_before = 0, pruned_params_after = 0;
  double pruned_ratio = 1;
  std::uint64_t flops_before = 0, flops_after = 0;
  std::uint64_t storage_before = 0, storage_after = 0;
  std::vector<LayerReportRow> layers;
  EvalSummary before, after;
  std::vector<double> loss_trajectory;
  bool feasible = true;
  std::vector<bool> layer_feasible;
  std::uint64_t seed = 0;
  ApInterpolation interpolation = ApInterpolation::AllPoint;
  nlohmann::json config = nlohmann::json::object();
};

/// Counting-based part of a report. `pruned_layers` are the layers the
/// pruned-layer ratio is measured on; masks absent for a layer mean dense.
PruneReport build_report(const LayerManifest& manifest, const std::vector<Index>& pruned_layers,
                         const LayerMasks& masks);

nlohmann::json report_to_json(const PruneReport& r);
PruneReport report_from_json(const nlohmann::json& j);

/// Human-readable table: compression summary, per-layer detail, and an
/// evaluation grid with rows per model and columns per IoU threshold,
/// followed by the published reference rows labelled as citations.
std::string render_report(const PruneReport& r);

/// Published reference rows (percent mAP at the default thresholds).
struct ReferenceRow {
  std::string label;
  std::string ratio;
  std::vector<double> map_percent;
};
std::vector<ReferenceRow> published_reference_rows();

/// Storage invariants on `r` plus the published arithmetic cross-checks.
std::vector<CrossCheck> report_self_test(const PruneReport* r = nullptr);

}  // namespace structprune
