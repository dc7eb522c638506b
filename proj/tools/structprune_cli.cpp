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

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "structprune/archive.hpp"
#include "structprune/config.hpp"
#include "structprune/dataset.hpp"
#include "structprune/errors.hpp"
#include "structprune/pipeline.hpp"
#include "structprune/report.hpp"

namespace fs = std::filesystem;
using namespace structprune;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

/// Errors in how the tool was invoked, as opposed to failures while running.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool out_required) {
  cmd->add_option("--config", a.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "seed for every stochastic component (overrides the config)");
  auto* out = cmd->add_option("--out", a.out, "output directory");
  if (out_required) out->required();
}

RunConfig resolve_config(const CommonArgs& a) {
  RunConfig cfg;
  try {
    cfg = a.config.empty() ? parse_config(json::object()) : load_config(a.config);
  } catch (const ParseError& e) {
    throw UsageError(e.what());
  }
  if (a.seed) cfg.seed = *a.seed;
  return cfg;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json_atomic(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

Index image_size(const RunConfig& cfg) {
  if (cfg.data.image_size > 0) return cfg.data.image_size;
  return cfg.task == TaskKind::Classification ? 16 : 64;
}

LayerManifest build_manifest(const RunConfig& cfg) {
  if (cfg.task == TaskKind::Classification)
    return tiny_classifier_manifest(image_size(cfg), 1, 4, cfg.width > 0 ? cfg.width : 16);
  return tiny_detect_manifest(image_size(cfg), 1, 3, cfg.width > 0 ? cfg.width : 8);
}

std::uint64_t test_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

Dataset synthesize(const RunConfig& cfg, Index count, std::uint64_t seed) {
  return cfg.task == TaskKind::Classification ? make_bar_classification_set(count, seed, image_size(cfg))
                                              : make_rectangle_detection_set(count, seed, image_size(cfg));
}

struct Splits {
  Dataset train, test;
};

Splits load_or_synthesize(const RunConfig& cfg, const std::string& data_dir) {
  Splits s;
  if (data_dir.empty()) {
    s.train = synthesize(cfg, cfg.data.train_count, cfg.seed);
    s.test = synthesize(cfg, cfg.data.test_count, test_seed(cfg.seed));
  } else {
    s.train = load_dataset(fs::path(data_dir) / "train");
    s.test = load_dataset(fs::path(data_dir) / "test");
  }
  if (s.train.task != cfg.task || s.test.task != cfg.task)
    throw UsageError("dataset task does not match config task '" + to_string(cfg.task) + "'");
  return s;
}

std::vector<AnchorSize> box_sizes(const Dataset& ds) {
  std::vector<AnchorSize> out;
  for (const auto& img : ds.boxes)
    for (const auto& b : img) out.push_back({b.x_max - b.x_min, b.y_max - b.y_min});
  return out;
}

json anchors_to_json(const std::vector<AnchorSize>& anchors) {
  json a = json::array();
  for (const auto& x : anchors) a.push_back({x.w, x.h});
  return a;
}

std::vector<AnchorSize> anchors_from_json(const json& j) {
  std::vector<AnchorSize> out;
  for (const auto& a : j) out.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
  return out;
}

/// Detection anchors: explicit config, then archive metadata, then k-means
/// on the training boxes (one scale of three).
TaskSpec task_spec(const RunConfig& cfg, const LayerManifest& manifest, const Dataset& train, const json& meta) {
  TaskSpec t;
  t.kind = cfg.task;
  if (t.kind != TaskKind::Detection) return t;
  t.stride = network_stride(manifest);
  if (!cfg.anchors.empty()) t.anchors = cfg.anchors;
  else if (meta.contains("anchors")) t.anchors = anchors_from_json(meta.at("anchors"));
  else t.anchors = kmeans_anchors(box_sizes(train), kAnchorsPerScale, cfg.seed);
  if (t.anchors.size() != static_cast<std::size_t>(kAnchorsPerScale))
    throw UsageError("detection needs exactly " + std::to_string(kAnchorsPerScale) + " anchors");
  return t;
}

EvalSummary evaluate(const Network<float>& net, const Dataset& test, const TaskSpec& task, const RunConfig& cfg,
                     std::vector<ImageBoxes>* predictions = nullptr) {
  EvalSummary e;
  if (task.kind == TaskKind::Classification) {
    e.accuracy = accuracy(net, test);
  } else {
    auto preds = predict_boxes(net, test, task, cfg.eval);
    e.sweep = map_sweep(preds, truth_records(test), default_iou_thresholds(), cfg.eval.interpolation);
    if (predictions) *predictions = std::move(preds);
  }
  return e;
}

json eval_json(const EvalSummary& e, ApInterpolation interp) {
  json j = json::object();
  if (e.accuracy) j["accuracy"] = *e.accuracy;
  if (e.sweep) {
    j["thresholds"] = e.sweep->thresholds;
    j["map"] = e.sweep->map;
    j["ap_interpolation"] = to_string(interp);
  }
  return j;
}

std::string sweep_table(const EvalSweep& s) {
  std::ostringstream os;
  os << "IoU ";
  for (double t : s.thresholds) os << ' ' << std::fixed << std::setprecision(2) << t;
  os << "\nmAP ";
  for (double m : s.map) os << ' ' << std::fixed << std::setprecision(4) << m;
  os << "\n";
  return os.str();
}

json base_meta(const RunConfig& cfg, const TaskSpec& task, const std::string& phase) {
  json meta = {{"seed", cfg.seed}, {"task", to_string(cfg.task)}, {"phase", phase}, {"config", config_to_json(cfg)}};
  if (task.kind == TaskKind::Detection) {
    meta["anchors"] = anchors_to_json(task.anchors);
    meta["stride"] = task.stride;
  }
  return meta;
}

// ---- subcommands ----

int cmd_synth(const CommonArgs& a) {
  const RunConfig cfg = resolve_config(a);
  const fs::path out(a.out);
  save_dataset(out / "train", synthesize(cfg, cfg.data.train_count, cfg.seed));
  save_dataset(out / "test", synthesize(cfg, cfg.data.test_count, test_seed(cfg.seed)));
  std::cout << "wrote " << cfg.data.train_count << " training and " << cfg.data.test_count << " test images to "
            << out.string() << "\n";
  return 0;
}

int cmd_train(const CommonArgs& a, const std::string& data_dir) {
  const RunConfig cfg = resolve_config(a);
  const auto data = load_or_synthesize(cfg, data_dir);
  const auto manifest = build_manifest(cfg);
  const auto task = task_spec(cfg, manifest, data.train, json::object());
  std::mt19937_64 rng(cfg.seed);
  Network<float> net(manifest);
  net.init_weights(rng);
  const auto stats = train_network(net, data.train, task, cfg.train, rng);
  const auto eval = evaluate(net, data.test, task, cfg);

  const fs::path out(a.out);
  save_archive(out / "model", archive_from_network(net, {}, base_meta(cfg, task, "trained")));
  json losses = json::array();
  for (const auto& s : stats) losses.push_back(s.mean_loss);
  write_json_atomic(out / "train.json", {{"seed", cfg.seed},
                                         {"config", config_to_json(cfg)},
                                         {"loss_trajectory", losses},
                                         {"eval", eval_json(eval, cfg.eval.interpolation)}});
  if (eval.accuracy) std::cout << "test accuracy " << *eval.accuracy << "\n";
  if (eval.sweep) std::cout << sweep_table(*eval.sweep);
  return 0;
}

int cmd_prune(const CommonArgs& a, const std::string& model_dir, const std::string& data_dir) {
  const RunConfig base = resolve_config(a);
  const auto archive = load_archive(model_dir);
  RunConfig cfg = base;
  const auto& manifest = archive.manifest;
  const auto data = load_or_synthesize(cfg, data_dir);
  const auto task = task_spec(cfg, manifest, data.train, archive.meta);
  Network<float> net = network_from_archive(archive);

  PruneSchedule schedule = cfg.schedule;
  try {
    schedule.constraints = resolve_constraints(manifest, cfg.targets);
    schedule.validate(manifest);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  const auto before = evaluate(net, data.test, task, cfg);

  std::ofstream progress(out / "progress.log", std::ios::trunc);
  PipelineHooks hooks;
  hooks.on_phase = [&](const std::string& phase, const Network<float>& n, const LayerMasks& masks) {
    save_archive(out / "checkpoints" / phase, archive_from_network(n, masks, base_meta(cfg, task, phase)));
  };
  hooks.on_progress = [&](const ProgressRecord& r) {
    progress << format_progress(r, schedule.constraints) << "\n" << std::flush;
  };

  std::mt19937_64 rng(cfg.seed);
  const auto result = run_pipeline(net, data.train, task, schedule, rng, hooks);
  std::vector<ImageBoxes> predictions;
  const auto after = evaluate(net, data.test, task, cfg, &predictions);

  std::vector<Index> pruned;
  for (const auto& c : schedule.constraints) pruned.push_back(c.layer);
  PruneReport report = build_report(manifest, pruned, result.masks);
  report.before = before;
  report.after = after;
  report.loss_trajectory = result.loss_trajectory;
  report.feasible = result.feasible;
  report.layer_feasible = result.layer_feasible;
  report.seed = cfg.seed;
  report.interpolation = cfg.eval.interpolation;
  report.config = config_to_json(cfg);

  save_archive(out / "model", archive_from_network(net, result.masks, base_meta(cfg, task, "pruned")));
  write_json_atomic(out / "report.json", report_to_json(report));
  const std::string table = render_report(report);
  write_text_atomic(out / "report.txt", table);
  if (!predictions.empty()) write_boxes_jsonl(out / "predictions.jsonl", predictions, true);
  std::cout << table;
  return 0;
}

int cmd_eval(const CommonArgs& a, const std::string& predictions, const std::string& truth,
             const std::string& model_dir, const std::string& data_dir) {
  const RunConfig base = resolve_config(a);
  json result;
  std::string text;
  if (!predictions.empty() || !truth.empty()) {
    if (predictions.empty() || truth.empty()) throw UsageError("--predictions and --truth go together");
    const auto sweep = map_sweep(read_boxes_jsonl(predictions), read_boxes_jsonl(truth), default_iou_thresholds(),
                                 base.eval.interpolation);
    result = eval_json({std::nullopt, sweep}, base.eval.interpolation);
    text = sweep_table(sweep);
  } else {
    if (model_dir.empty()) throw UsageError("eval needs --predictions/--truth or --model");
    const auto archive = load_archive(model_dir);
    RunConfig cfg = base;
    if (a.config.empty() && archive.meta.contains("config")) cfg = parse_config(archive.meta.at("config"));
    if (a.seed) cfg.seed = *a.seed;
    const auto data = load_or_synthesize(cfg, data_dir);
    const auto task = task_spec(cfg, archive.manifest, data.train, archive.meta);
    const auto net = network_from_archive(archive);
    std::vector<ImageBoxes> preds;
    const auto e = evaluate(net, data.test, task, cfg, &preds);
    result = eval_json(e, cfg.eval.interpolation);
    if (e.accuracy) text = "accuracy " + std::to_string(*e.accuracy) + "\n";
    if (e.sweep) text = sweep_table(*e.sweep);
    if (!a.out.empty() && !preds.empty()) write_boxes_jsonl(fs::path(a.out) / "predictions.jsonl", preds, true);
  }
  if (!a.out.empty()) {
    write_json_atomic(fs::path(a.out) / "eval.json", result);
    write_text_atomic(fs::path(a.out) / "eval.txt", text);
  }
  std::cout << text;
  return 0;
}

int cmd_report(const CommonArgs& a, const std::string& model_dir, const std::string& from, bool self_test) {
  std::optional<PruneReport> report;
  if (!from.empty()) {
    std::ifstream in(from);
    if (!in) throw UsageError("cannot open " + from);
    report = report_from_json(json::parse(in));
  } else if (!model_dir.empty()) {
    const auto archive = load_archive(model_dir);
    report = build_report(archive.manifest, archive.manifest.prunable_layers(), archive.masks);
    if (archive.meta.contains("seed")) report->seed = archive.meta.at("seed").get<std::uint64_t>();
    if (archive.meta.contains("config")) report->config = archive.meta.at("config");
  } else if (!self_test) {
    throw UsageError("report needs --model, --from or --self-test");
  }

  bool ok = true;
  std::ostringstream checks;
  if (self_test) {
    for (const auto& c : report_self_test(report ? &*report : nullptr)) {
      checks << (c.pass() ? "PASS " : "FAIL ") << c.name << ": computed " << c.computed << ", reference "
             << c.reference << "\n";
      ok = ok && c.pass();
    }
  }
  std::string text = report ? render_report(*report) : std::string();
  text += checks.str();
  if (!a.out.empty()) {
    if (report) write_json_atomic(fs::path(a.out) / "report.json", report_to_json(*report));
    write_text_atomic(fs::path(a.out) / "report.txt", text);
  }
  std::cout << text;
  return ok ? 0 : kExitFailure;
}

int cmd_anchors(const CommonArgs& a, const std::string& truth, const std::string& data_dir, std::size_t k) {
  const RunConfig cfg = resolve_config(a);
  std::vector<AnchorSize> sizes;
  if (!truth.empty()) {
    for (const auto& img : read_boxes_jsonl(truth))
      for (const auto& b : img.boxes) sizes.push_back({b.x_max - b.x_min, b.y_max - b.y_min});
  } else if (!data_dir.empty()) {
    sizes = box_sizes(load_dataset(fs::path(data_dir) / "train"));
  } else {
    throw UsageError("anchors needs --truth or --data");
  }
  if (sizes.size() < k)
    throw UsageError("k-means needs at least " + std::to_string(k) + " boxes, got " + std::to_string(sizes.size()));
  const auto anchors = kmeans_anchors(sizes, k, cfg.seed);
  json scales = json::array();
  for (std::size_t s = 0; s * kAnchorsPerScale < anchors.size(); ++s) {
    json group = json::array();
    for (std::size_t i = s * kAnchorsPerScale; i < std::min(anchors.size(), (s + 1) * kAnchorsPerScale); ++i)
      group.push_back({anchors[i].w, anchors[i].h});
    scales.push_back(group);
  }
  const json out = {{"seed", cfg.seed}, {"k", k}, {"anchors", anchors_to_json(anchors)}, {"scales", scales}};
  if (!a.out.empty()) write_json_atomic(fs::path(a.out) / "anchors.json", out);
  for (std::size_t s = 0; s < scales.size(); ++s) {
    std::cout << "scale " << s << ":";
    for (const auto& x : scales[s]) std::cout << "  " << x[0].get<double>() << "x" << x[1].get<double>();
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured weight pruning for convolutional networks"};
  app.require_subcommand(1);

  CommonArgs synth_a, train_a, prune_a, eval_a, report_a, anchors_a;
  std::string train_data, prune_model, prune_data, eval_pred, eval_truth, eval_model, eval_data;
  std::string report_model, report_from, anchors_truth, anchors_data;
  bool report_self = false;
  std::size_t anchors_k = 9;

  auto* synth = app.add_subcommand("synth", "write a synthetic train/test dataset");
  add_common(synth, synth_a, true);

  auto* train = app.add_subcommand("train", "train a dense desk-scale network");
  add_common(train, train_a, true);
  train->add_option("--data", train_data, "dataset directory with train/ and test/")->check(CLI::ExistingDirectory);

  auto* prune = app.add_subcommand("prune", "ADMM pre-pruning, masked mapping and retraining");
  add_common(prune, prune_a, true);
  prune->add_option("--model", prune_model, "input model archive")->required()->check(CLI::ExistingDirectory);
  prune->add_option("--data", prune_data, "dataset directory with train/ and test/")->check(CLI::ExistingDirectory);

  auto* eval = app.add_subcommand("eval", "mAP sweep or accuracy");
  add_common(eval, eval_a, false);
  eval->add_option("--predictions", eval_pred, "scored predictions (JSON lines)")->check(CLI::ExistingFile);
  eval->add_option("--truth", eval_truth, "ground-truth boxes (JSON lines)")->check(CLI::ExistingFile);
  eval->add_option("--model", eval_model, "model archive")->check(CLI::ExistingDirectory);
  eval->add_option("--data", eval_data, "dataset directory with train/ and test/")->check(CLI::ExistingDirectory);

  auto* report = app.add_subcommand("report", "compression report for an archive");
  add_common(report, report_a, false);
  report->add_option("--model", report_model, "model archive")->check(CLI::ExistingDirectory);
  report->add_option("--from", report_from, "re-render a report.json")->check(CLI::ExistingFile);
  report->add_flag("--self-test", report_self, "run the storage and published-figure cross-checks");

  auto* anchors = app.add_subcommand("anchors", "k-means anchor priors");
  add_common(anchors, anchors_a, false);
  anchors->add_option("--truth", anchors_truth, "boxes (JSON lines)")->check(CLI::ExistingFile);
  anchors->add_option("--data", anchors_data, "dataset directory with train/")->check(CLI::ExistingDirectory);
  anchors->add_option("--k", anchors_k, "number of clusters")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(synth_a);
    if (*train) return cmd_train(train_a, train_data);
    if (*prune) return cmd_prune(prune_a, prune_model, prune_data);
    if (*eval) return cmd_eval(eval_a, eval_pred, eval_truth, eval_model, eval_data);
    if (*report) return cmd_report(report_a, report_model, report_from, report_self);
    if (*anchors) return cmd_anchors(anchors_a, anchors_truth, anchors_data, anchors_k);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
