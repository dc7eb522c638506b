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

#include "structprune/config.hpp"

#include <fstream>
#include <set>

namespace structprune {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ParseError("unknown config key '" + key + "' in " + where);
}

void read_train(const nlohmann::json& j, TrainOptions& t, const std::string& where) {
  reject_unknown(j, {"epochs", "batch_size", "lr0", "warmup_batches", "total_batches", "lr_min", "momentum",
                     "weight_decay", "clip_norm", "mixup", "mixup_alpha"},
                 where);
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.lr0 = j.value("lr0", t.lr0);
  t.warmup_batches = j.value("warmup_batches", t.warmup_batches);
  t.total_batches = j.value("total_batches", t.total_batches);
  t.lr_min = j.value("lr_min", t.lr_min);
  t.momentum = j.value("momentum", t.momentum);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  t.clip_norm = j.value("clip_norm", t.clip_norm);
  t.mixup.enabled = j.value("mixup", t.mixup.enabled);
  t.mixup.alpha = j.value("mixup_alpha", t.mixup.alpha);
  if (t.epochs < 0 || t.batch_size < 1) throw ParseError(where + ": epochs must be >= 0 and batch_size >= 1");
  if (!(t.mixup.alpha > 0)) throw ParseError(where + ": mixup_alpha must be positive");
  if (!(t.clip_norm >= 0)) throw ParseError(where + ": clip_norm must be >= 0");
}

nlohmann::json train_to_json(const TrainOptions& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"lr0", t.lr0},
          {"warmup_batches", t.warmup_batches},
          {"total_batches", t.total_batches},
          {"lr_min", t.lr_min},
          {"momentum", t.momentum},
          {"weight_decay", t.weight_decay},
          {"clip_norm", t.clip_norm},
          {"mixup", t.mixup.enabled},
          {"mixup_alpha", t.mixup.alpha}};
}

}  // namespace

void PruneSchedule::validate(const LayerManifest& manifest) const {
  if (admm_iterations < 1 || epochs_per_iteration < 1 || retrain_epochs < 1)
    throw InvalidArgument("admm_iterations, epochs_per_iteration and retrain_epochs must be >= 1");
  if (!(rho > 0)) throw InvalidArgument("rho must be positive");
  std::set<Index> seen;
  for (const auto& c : constraints) {
    if (c.layer < 0 || c.layer >= static_cast<Index>(manifest.layers.size()) ||
        manifest.layers[c.layer].kind != LayerKind::Conv || !manifest.layers[c.layer].prunable)
      throw InvalidArgument("constraint targets layer " + std::to_string(c.layer) + ", which is not prunable");
    if (!seen.insert(c.layer).second) throw InvalidArgument("layer " + std::to_string(c.layer) + " constrained twice");
    const auto s = manifest.layers[c.layer].weight_shape();
    c.constraint.validate(s.filters, s.gemm_cols());
  }
  for (Index i : manifest.prunable_layers())
    if (!seen.count(i)) throw InvalidArgument("prunable layer " + std::to_string(i) + " has no constraint");
}

std::vector<LayerConstraint> resolve_constraints(const LayerManifest& manifest, const PruneTargets& t) {
  std::vector<LayerConstraint> out;
  for (Index i : manifest.prunable_layers()) {
    const auto s = manifest.layers[i].weight_shape();
    SparsityConstraint c{t.mode, retained_count(t.keep_filters, s.filters), retained_count(t.keep_columns, s.gemm_cols()),
                         retained_count(t.keep_weights, s.size())};
    for (const auto& [layer, o] : t.overrides)
      if (layer == i) c = o;
    out.push_back({i, c});
  }
  return out;
}

RunConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  RunConfig c;
  c.source = j;
  try {
    reject_unknown(j, {"task", "seed", "data", "width", "train", "prune", "eval", "anchors", "lr0", "warmup_batches",
                       "total_batches", "lr_min", "mixup_alpha"},
                   "config");
    if (j.contains("task")) c.task = parse_task_kind(j.at("task").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.width = j.value("width", c.width);
    if (j.contains("data")) {
      const auto& d = j.at("data");
      reject_unknown(d, {"train_count", "test_count", "image_size"}, "data");
      c.data.train_count = d.value("train_count", c.data.train_count);
      c.data.test_count = d.value("test_count", c.data.test_count);
      c.data.image_size = d.value("image_size", c.data.image_size);
    }
    if (j.contains("train")) read_train(j.at("train"), c.train, "train");
    // Flat schedule keys apply to the main training phase.
    nlohmann::json flat = nlohmann::json::object();
    for (const char* k : {"lr0", "warmup_batches", "total_batches", "lr_min", "mixup_alpha"})
      if (j.contains(k)) flat[k] = j.at(k);
    read_train(flat, c.train, "config");

    c.schedule.admm_train = c.train;
    c.schedule.admm_train.lr0 = c.train.lr0 * 0.2;
    c.schedule.retrain = c.schedule.admm_train;
    if (j.contains("prune")) {
      const auto& p = j.at("prune");
      reject_unknown(p, {"mode", "keep_filters", "keep_columns", "keep_weights", "layers", "rho", "admm_iterations",
                         "epochs_per_iteration", "retrain_epochs", "combined_strategy", "admm_train", "retrain"},
                     "prune");
      if (p.contains("mode")) c.targets.mode = parse_sparsity_mode(p.at("mode").get<std::string>());
      c.targets.keep_filters = p.value("keep_filters", c.targets.keep_filters);
      c.targets.keep_columns = p.value("keep_columns", c.targets.keep_columns);
      c.targets.keep_weights = p.value("keep_weights", c.targets.keep_weights);
      if (p.contains("layers")) {
        for (const auto& l : p.at("layers")) {
          reject_unknown(l, {"layer", "mode", "alpha_filters", "alpha_columns", "alpha_weights"}, "prune.layers");
          SparsityConstraint sc;
          sc.mode = l.contains("mode") ? parse_sparsity_mode(l.at("mode").get<std::string>()) : c.targets.mode;
          sc.alpha_filters = l.value("alpha_filters", Index{0});
          sc.alpha_columns = l.value("alpha_columns", Index{0});
          sc.alpha_weights = l.value("alpha_weights", Index{0});
          c.targets.overrides.emplace_back(l.at("layer").get<Index>(), sc);
        }
      }
      c.schedule.rho = p.value("rho", c.schedule.rho);
      c.schedule.admm_iterations = p.value("admm_iterations", c.schedule.admm_iterations);
      c.schedule.epochs_per_iteration = p.value("epochs_per_iteration", c.schedule.epochs_per_iteration);
      c.schedule.retrain_epochs = p.value("retrain_epochs", c.schedule.retrain_epochs);
      if (p.contains("combined_strategy")) {
        const auto s = p.at("combined_strategy").get<std::string>();
        if (s == "sequential") c.schedule.combined_strategy = CombinedStrategy::Sequential;
        else if (s == "joint") c.schedule.combined_strategy = CombinedStrategy::Joint;
        else throw ParseError("combined_strategy must be 'sequential' or 'joint'");
      }
      if (p.contains("admm_train")) read_train(p.at("admm_train"), c.schedule.admm_train, "prune.admm_train");
      c.schedule.retrain = c.schedule.admm_train;
      if (p.contains("retrain")) read_train(p.at("retrain"), c.schedule.retrain, "prune.retrain");
    }
    c.schedule.admm_train.epochs = c.schedule.admm_iterations * c.schedule.epochs_per_iteration;
    c.schedule.retrain.epochs = c.schedule.retrain_epochs;
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      reject_unknown(e, {"ap_interpolation", "score_threshold", "nms_iou"}, "eval");
      if (e.contains("ap_interpolation"))
        c.eval.interpolation = parse_ap_interpolation(e.at("ap_interpolation").get<std::string>());
      c.eval.score_threshold = e.value("score_threshold", c.eval.score_threshold);
      c.eval.nms_iou = e.value("nms_iou", c.eval.nms_iou);
    }
    if (j.contains("anchors"))
      for (const auto& a : j.at("anchors")) c.anchors.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("config: ") + ex.what());
  } catch (const InvalidArgument& ex) {
    throw ParseError(std::string("config: ") + ex.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  try {
    return parse_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError("config " + path.string() + ": " + ex.what());
  }
}

nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["task"] = to_string(c.task);
  j["seed"] = c.seed;
  j["width"] = c.width;
  j["data"] = {{"train_count", c.data.train_count}, {"test_count", c.data.test_count}, {"image_size", c.data.image_size}};
  j["train"] = train_to_json(c.train);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& [layer, sc] : c.targets.overrides)
    layers.push_back({{"layer", layer},
                      {"mode", to_string(sc.mode)},
                      {"alpha_filters", sc.alpha_filters},
                      {"alpha_columns", sc.alpha_columns},
                      {"alpha_weights", sc.alpha_weights}});
  j["prune"] = {{"mode", to_string(c.targets.mode)},
                {"keep_filters", c.targets.keep_filters},
                {"keep_columns", c.targets.keep_columns},
                {"keep_weights", c.targets.keep_weights},
                {"layers", layers},
                {"rho", c.schedule.rho},
                {"admm_iterations", c.schedule.admm_iterations},
                {"epochs_per_iteration", c.schedule.epochs_per_iteration},
                {"retrain_epochs", c.schedule.retrain_epochs},
                {"combined_strategy", c.schedule.combined_strategy == CombinedStrategy::Sequential ? "sequential" : "joint"},
                {"admm_train", train_to_json(c.schedule.admm_train)},
                {"retrain", train_to_json(c.schedule.retrain)}};
  j["eval"] = {{"ap_interpolation", to_string(c.eval.interpolation)},
               {"score_threshold", c.eval.score_threshold},
               {"nms_iou", c.eval.nms_iou}};
  nlohmann::json anchors = nlohmann::json::array();
  for (const auto& a : c.anchors) anchors.push_back({a.w, a.h});
  j["anchors"] = anchors;
  return j;
}

}  // namespace structprune
