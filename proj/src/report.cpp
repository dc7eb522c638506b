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

#include "structprune/report.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "structprune/errors.hpp"

namespace structprune {

namespace {

double safe_ratio(double before, double after) { return after > 0 ? before / after : 0.0; }

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

nlohmann::json eval_to_json(const EvalSummary& e) {
  nlohmann::json j = nlohmann::json::object();
  if (e.accuracy) j["accuracy"] = *e.accuracy;
  if (e.sweep) j["map_sweep"] = {{"thresholds", e.sweep->thresholds}, {"map", e.sweep->map}};
  return j;
}

EvalSummary eval_from_json(const nlohmann::json& j, ApInterpolation interp) {
  EvalSummary e;
  if (j.contains("accuracy")) e.accuracy = j.at("accuracy").get<double>();
  if (j.contains("map_sweep"))
    e.sweep = EvalSweep{j.at("map_sweep").at("thresholds").get<std::vector<double>>(),
                        j.at("map_sweep").at("map").get<std::vector<double>>(), interp};
  return e;
}

}  // namespace

PruneReport build_report(const LayerManifest& manifest, const std::vector<Index>& pruned_layers,
                         const LayerMasks& masks) {
  check_masks(manifest, masks);
  PruneReport r;
  r.params_before = count_params(manifest);
  r.params_after = count_params(manifest, masks);
  r.ratio = safe_ratio(double(r.params_before), double(r.params_after));
  r.pruned_params_before = count_params(manifest, pruned_layers);
  r.pruned_params_after = count_params(manifest, pruned_layers, masks);
  r.pruned_ratio = safe_ratio(double(r.pruned_params_before), double(r.pruned_params_after));
  r.flops_before = count_flops(manifest);
  r.flops_after = count_flops(manifest, masks);
  r.storage_before = storage_bytes(r.params_before);
  r.storage_after = storage_bytes(r.params_after);

  std::string mode;
  for (Index l : pruned_layers) {
    const auto& d = manifest.layers.at(l);
    LayerReportRow row;
    row.layer = l;
    row.filters = d.F;
    row.columns = d.C * d.KH * d.KW;
    row.params_before = count_params(manifest, std::vector<Index>{l});
    row.params_after = count_params(manifest, std::vector<Index>{l}, masks);
    row.kept_filters = row.filters;
    row.kept_columns = row.columns;
    row.mode = "dense";
    if (auto it = masks.find(l); it != masks.end()) {
      row.mode = to_string(it->second.mode);
      row.kept_filters = static_cast<Index>(retained_rows(it->second).size());
      row.kept_columns = static_cast<Index>(retained_cols(it->second).size());
    }
    row.filter_ratio = safe_ratio(double(row.filters), double(row.kept_filters));
    row.column_ratio = safe_ratio(double(row.columns), double(row.kept_columns));
    row.net_ratio = safe_ratio(double(row.params_before), double(row.params_after));
    if (mode.empty()) mode = row.mode;
    else if (mode != row.mode) mode = "mixed";
    r.layers.push_back(row);
  }
  r.mode = mode.empty() ? "dense" : mode;
  return r;
}

nlohmann::json report_to_json(const PruneReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : r.layers)
    layers.push_back({{"layer", l.layer},
                      {"mode", l.mode},
                      {"filters", l.filters},
                      {"columns", l.columns},
                      {"kept_filters", l.kept_filters},
                      {"kept_columns", l.kept_columns},
                      {"params_before", l.params_before},
                      {"params_after", l.params_after},
                      {"filter_ratio", l.filter_ratio},
                      {"column_ratio", l.column_ratio},
                      {"net_ratio", l.net_ratio}});
  nlohmann::json refs = nlohmann::json::array();
  for (const auto& ref : published_reference_rows())
    refs.push_back({{"label", ref.label}, {"ratio", ref.ratio}, {"map_percent", ref.map_percent}});
  return {{"mode", r.mode},
          {"params_before", r.params_before},
          {"params_after", r.params_after},
          {"ratio", r.ratio},
          {"pruned_params_before", r.pruned_params_before},
          {"pruned_params_after", r.pruned_params_after},
          {"pruned_ratio", r.pruned_ratio},
          {"flops_before", r.flops_before},
          {"flops_after", r.flops_after},
          {"storage_before_bytes", r.storage_before},
          {"storage_after_bytes", r.storage_after},
          {"layers", layers},
          {"eval_before", eval_to_json(r.before)},
          {"eval_after", eval_to_json(r.after)},
          {"ap_interpolation", to_string(r.interpolation)},
          {"loss_trajectory", r.loss_trajectory},
          {"feasible", r.feasible},
          {"layer_feasible", r.layer_feasible},
          {"seed", r.seed},
          {"config", r.config},
          {"published_reference", {{"note", "cited figures, not measured by this run"}, {"rows", refs}}}};
}

PruneReport report_from_json(const nlohmann::json& j) {
  try {
    PruneReport r;
    r.mode = j.at("mode").get<std::string>();
    r.params_before = j.at("params_before").get<std::uint64_t>();
    r.params_after = j.at("params_after").get<std::uint64_t>();
    r.ratio = j.at("ratio").get<double>();
    r.pruned_params_before = j.at("pruned_params_before").get<std::uint64_t>();
    r.pruned_params_after = j.at("pruned_params_after").get<std::uint64_t>();
    r.pruned_ratio = j.at("pruned_ratio").get<double>();
    r.flops_before = j.at("flops_before").get<std::uint64_t>();
    r.flops_after = j.at("flops_after").get<std::uint64_t>();
    r.storage_before = j.at("storage_before_bytes").get<std::uint64_t>();
    r.storage_after = j.at("storage_after_bytes").get<std::uint64_t>();
    for (const auto& l : j.at("layers"))
      r.layers.push_back({l.at("layer").get<Index>(), l.at("mode").get<std::string>(), l.at("filters").get<Index>(),
                          l.at("columns").get<Index>(), l.at("kept_filters").get<Index>(),
                          l.at("kept_columns").get<Index>(), l.at("params_before").get<std::uint64_t>(),
                          l.at("params_after").get<std::uint64_t>(), l.at("filter_ratio").get<double>(),
                          l.at("column_ratio").get<double>(), l.at("net_ratio").get<double>()});
    r.interpolation = parse_ap_interpolation(j.at("ap_interpolation").get<std::string>());
    r.before = eval_from_json(j.at("eval_before"), r.interpolation);
    r.after = eval_from_json(j.at("eval_after"), r.interpolation);
    r.loss_trajectory = j.at("loss_trajectory").get<std::vector<double>>();
    r.feasible = j.at("feasible").get<bool>();
    r.layer_feasible = j.at("layer_feasible").get<std::vector<bool>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.at("config");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

std::vector<ReferenceRow> published_reference_rows() {
  return {{"Original model", "1x", {81.2, 76.3, 71.2, 63.4, 54.7, 42.3, 30.7, 19.1}},
          {"Combined pruned", "36.02x", {81.2, 76.3, 71.0, 63.5, 53.4, 42.8, 31.2, 19.3}}};
}

std::string render_report(const PruneReport& r) {
  std::ostringstream os;
  const auto mb = [](std::uint64_t bytes) { return fmt("%.3f", double(bytes) / 1e6); };
  os << "Compression summary (mode: " << r.mode << ", seed " << r.seed << ")\n";
  os << pad("", 24, true) << pad("before", 14) << pad("after", 14) << pad("ratio", 10) << "\n";
  os << pad("params (all conv)", 24, true) << pad(std::to_string(r.params_before), 14)
     << pad(std::to_string(r.params_after), 14) << pad(fmt("%.2fx", r.ratio), 10) << "\n";
  os << pad("params (pruned layers)", 24, true) << pad(std::to_string(r.pruned_params_before), 14)
     << pad(std::to_string(r.pruned_params_after), 14) << pad(fmt("%.2fx", r.pruned_ratio), 10) << "\n";
  os << pad("FLOPs", 24, true) << pad(std::to_string(r.flops_before), 14) << pad(std::to_string(r.flops_after), 14)
     << pad(fmt("%.2fx", safe_ratio(double(r.flops_before), double(r.flops_after))), 10) << "\n";
  os << pad("storage (MB)", 24, true) << pad(mb(r.storage_before), 14) << pad(mb(r.storage_after), 14) << "\n";
  os << "feasible: " << (r.feasible ? "yes" : "no") << "\n\n";

  os << "Per-layer detail\n";
  os << pad("layer", 6) << pad("mode", 10) << pad("filters", 12) << pad("columns", 12) << pad("filter x", 10)
     << pad("column x", 10) << pad("net x", 10) << "\n";
  for (const auto& l : r.layers)
    os << pad(std::to_string(l.layer), 6) << pad(l.mode, 10)
       << pad(std::to_string(l.kept_filters) + "/" + std::to_string(l.filters), 12)
       << pad(std::to_string(l.kept_columns) + "/" + std::to_string(l.columns), 12) << pad(fmt("%.2f", l.filter_ratio), 10)
       << pad(fmt("%.2f", l.column_ratio), 10) << pad(fmt("%.2f", l.net_ratio), 10) << "\n";
  os << "\n";

  const bool detection = r.before.sweep || r.after.sweep;
  if (detection) {
    const auto& th = r.before.sweep ? r.before.sweep->thresholds : r.after.sweep->thresholds;
    os << "Localization accuracy (mAP %, " << to_string(r.interpolation) << " AP) by IoU threshold\n";
    os << pad("", 26, true);
    for (double t : th) os << pad(fmt("%.2f", t), 7);
    os << "\n";
    const auto row = [&](const std::string& label, const std::string& ratio, const std::optional<EvalSweep>& s) {
      if (!s) return;
      os << pad(label, 16, true) << pad(ratio, 10);
      for (double m : s->map) os << pad(fmt("%.1f", 100.0 * m), 7);
      os << "\n";
    };
    row("Original model", "1x", r.before.sweep);
    row(r.mode + " pruned", fmt("%.2fx", r.ratio), r.after.sweep);
  } else {
    os << "Classification accuracy (%)\n";
    if (r.before.accuracy) os << pad("Original model", 16, true) << pad("1x", 10) << pad(fmt("%.2f", 100 * *r.before.accuracy), 9) << "\n";
    if (r.after.accuracy)
      os << pad(r.mode + " pruned", 16, true) << pad(fmt("%.2fx", r.ratio), 10)
         << pad(fmt("%.2f", 100 * *r.after.accuracy), 9) << "\n";
  }
  os << "\nPublished reference (YOLOv3-320, single class; cited, not measured here)\n";
  os << pad("", 26, true);
  for (double t : default_iou_thresholds()) os << pad(fmt("%.2f", t), 7);
  os << "\n";
  for (const auto& ref : published_reference_rows()) {
    os << pad(ref.label, 16, true) << pad(ref.ratio, 10);
    for (double m : ref.map_percent) os << pad(fmt("%.1f", m), 7);
    os << "\n";
  }
  return os.str();
}

std::vector<CrossCheck> report_self_test(const PruneReport* r) {
  std::vector<CrossCheck> out;
  if (r) {
    out.push_back({"storage_before = 4 x params", double(r->storage_before), 4.0 * double(r->params_before), 0});
    out.push_back({"storage_after = 4 x params", double(r->storage_after), 4.0 * double(r->params_after), 0});
  }
  std::optional<LayerManifest> yolo;
  const auto path = bundled_yolov3_manifest_path();
  if (std::filesystem::exists(path)) yolo = load_manifest(path);
  for (auto& c : reference_cross_checks(yolo ? &*yolo : nullptr)) out.push_back(std::move(c));
  return out;
}

}  // namespace structprune
