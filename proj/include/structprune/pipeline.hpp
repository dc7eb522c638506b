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

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "structprune/accounting.hpp"
#include "structprune/admm.hpp"
#include "structprune/config.hpp"
#include "structprune/dataset.hpp"
#include "structprune/detection.hpp"
#include "structprune/metrics.hpp"
#include "structprune/network.hpp"

namespace structprune {

/// Everything the training loop needs to know about the task head.
struct TaskSpec {
  TaskKind kind = TaskKind::Classification;
  std::vector<AnchorSize> anchors;  // detection
  double stride = 1.0;              // detection: input pixels per grid cell
};

/// Total downsampling factor of a detection network.
double network_stride(const LayerManifest& manifest);

/// Called after backward and before the update, to add extra gradient terms.
using GradientHook = std::function<void(Network<float>&)>;
/// Extra loss added to each batch's reported loss.
using LossHook = std::function<double()>;

struct EpochStats {
  double mean_loss = 0;
};

/// Mini-batch SGD with momentum and weight decay under a warmup + cosine
/// learning-rate schedule. When masks are given, weight gradients (and
/// hence momentum) are multiplied by them before every update, so pruned
/// weights stay exactly zero.
class Trainer {
 public:
  Trainer(Network<float>& net, const Dataset& data, TaskSpec task, TrainOptions options);

  /// Runs `epochs` epochs (continuing the schedule from where the last call
  /// stopped). Throws Divergence on a non-finite loss.
  std::vector<EpochStats> run(int epochs, std::mt19937_64& rng, const GradientHook& hook = {},
                              const LayerMasks* masks = nullptr, const LossHook& extra_loss = {});

  const LrSchedule& schedule() const { return schedule_; }
  std::int64_t batches_per_epoch() const { return batches_per_epoch_; }

 private:
  double batch_step(std::span<const Index> indices, std::mt19937_64& rng);

  Network<float>& net_;
  const Dataset& data_;
  TaskSpec task_;
  TrainOptions options_;
  LrSchedule schedule_;
  std::int64_t batches_per_epoch_ = 0;
  std::int64_t step_ = 0;
  std::vector<GemmMatrix<float>> velocity_w_;
  std::vector<Vector<float>> velocity_b_;
};

/// Loss (and gradient, stored in the network) for one packed batch.
double task_loss_and_backward(Network<float>& net, const FeatureMap<float>& batch, const TaskSpec& task,
                              const GemmMatrix<float>* soft_labels,
                              const std::vector<std::vector<WeightedBox>>* boxes);

/// Classification accuracy in [0, 1].
double accuracy(const Network<float>& net, const Dataset& data);

/// Decoded detections, one record per image with ids "0", "1", ...
std::vector<ImageBoxes> predict_boxes(const Network<float>& net, const Dataset& data, const TaskSpec& task,
                                      const EvalOptions& eval);

/// Trains a freshly initialised network; returns the per-epoch stats.
std::vector<EpochStats> train_network(Network<float>& net, const Dataset& data, const TaskSpec& task,
                                      const TrainOptions& options, std::mt19937_64& rng);

/// Masked retraining: gradients multiplied by the masks before every update.
void retrain(Network<float>& net, const Dataset& data, const TaskSpec& task, const TrainOptions& options,
             const LayerMasks& masks, std::mt19937_64& rng);

struct ProgressRecord {
  std::string phase;
  int iteration = 0;
  double loss = 0;
  std::vector<double> residuals;  // ||W_i - Z_i||_F per constrained layer
};

/// Line-oriented form: "<phase> iter=<k> loss=<l> residual[<layer>]=<r> ..."
std::string format_progress(const ProgressRecord& r, const std::vector<LayerConstraint>& constraints);

struct PipelineHooks {
  /// Invoked after each completed phase ("preprune", "mapped", ...).
  std::function<void(const std::string& phase, const Network<float>&, const LayerMasks&)> on_phase;
  /// Invoked with the state before and after every Z/U update.
  std::function<void(const AdmmState<float>& before, const AdmmState<float>& after,
                     const std::vector<SparsityConstraint>& constraints)>
      on_admm_step;
  std::function<void(const ProgressRecord&)> on_progress;
};

struct PipelineResult {
  LayerMasks masks;
  std::vector<ProgressRecord> progress;
  std::vector<double> loss_trajectory;  // mean loss of every training epoch, all phases
  bool feasible = false;                // every layer satisfies its constraint after mapping
  std::vector<bool> layer_feasible;
};

/// ADMM pre-pruning, masked mapping and masked retraining. Combined
/// constraints run filter then column stages (sequential strategy) or one
/// joint ADMM run.
PipelineResult run_pipeline(Network<float>& net, const Dataset& data, const TaskSpec& task,
                            const PruneSchedule& schedule, std::mt19937_64& rng, const PipelineHooks& hooks = {});

}  // namespace structprune
