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

#include "structprune/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "structprune/detection.hpp"
#include "structprune/loss.hpp"

namespace structprune {

namespace {

// Rescales weight and bias gradients so their joint norm is at most `limit`.
void clip_gradients(Network<float>& net, const std::vector<Index>& convs, double limit) {
  double sq = 0;
  for (Index i : convs) {
    const auto& c = net.conv(i);
    sq += c.grad_weight.cast<double>().squaredNorm() + c.grad_bias.cast<double>().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (!(norm > limit)) return;
  const auto scale = static_cast<float>(limit / norm);
  for (Index i : convs) {
    net.conv(i).grad_weight *= scale;
    net.conv(i).grad_bias *= scale;
  }
}

}  // namespace

double network_stride(const LayerManifest& manifest) {
  const auto& first = manifest.layers.front();
  if (first.kind != LayerKind::Input) throw InvalidArgument("detection manifests need an input descriptor");
  const auto convs = manifest.conv_layers();
  if (convs.empty()) throw InvalidArgument("manifest has no conv layers");
  const auto& head = manifest.layers[convs.back()];
  return static_cast<double>(first.H_out) / static_cast<double>(head.H_out);
}

Trainer::Trainer(Network<float>& net, const Dataset& data, TaskSpec task, TrainOptions options)
    : net_(net), data_(data), task_(std::move(task)), options_(options) {
  if (data_.size() == 0) throw InvalidArgument("training set is empty");
  batches_per_epoch_ = (data_.size() + options_.batch_size - 1) / options_.batch_size;
  schedule_.lr0 = options_.lr0;
  schedule_.lr_min = options_.lr_min;
  schedule_.total_batches = options_.total_batches > 0 ? options_.total_batches
                                                       : std::max<std::int64_t>(1, options_.epochs * batches_per_epoch_);
  schedule_.warmup_batches = std::min(options_.warmup_batches >= 0 ? options_.warmup_batches : batches_per_epoch_,
                                      schedule_.total_batches);
  schedule_.validate();
  for (Index i : net_.conv_layers()) {
    velocity_w_.push_back(GemmMatrix<float>::Zero(net_.conv(i).weight.rows(), net_.conv(i).weight.cols()));
    velocity_b_.push_back(Vector<float>::Zero(net_.conv(i).bias.size()));
  }
}

double task_loss_and_backward(Network<float>& net, const FeatureMap<float>& batch, const TaskSpec& task,
                              const GemmMatrix<float>* soft_labels, const std::vector<std::vector<WeightedBox>>* boxes) {
  const auto out = net.forward(batch);
  LossGrad<float> lg;
  if (task.kind == TaskKind::Classification) {
    if (!soft_labels) throw InvalidArgument("classification needs labels");
    lg = softmax_cross_entropy(out, *soft_labels);
  } else {
    if (!boxes) throw InvalidArgument("detection needs boxes");
    lg = detection_loss(out, *boxes, task.anchors, task.stride);
  }
  net.backward(lg.grad);
  return lg.loss;
}

double Trainer::batch_step(std::span<const Index> indices, std::mt19937_64& rng) {
  FeatureMap<float> x = data_.batch(indices);
  const Index n = static_cast<Index>(indices.size());
  std::vector<Index> partner(indices.begin(), indices.end());
  double lambda = 1.0;
  if (options_.mixup.enabled) {
    lambda = sample_lambda(options_.mixup, rng);
    std::shuffle(partner.begin(), partner.end(), rng);
    const FeatureMap<float> other = data_.batch(partner);
    x.data = (lambda * x.data.cast<double>() + (1.0 - lambda) * other.data.cast<double>()).cast<float>();
  }

  if (task_.kind == TaskKind::Classification) {
    std::vector<int> a(n), b(n);
    for (Index k = 0; k < n; ++k) {
      a[k] = data_.labels[indices[k]];
      b[k] = data_.labels[partner[k]];
    }
    GemmMatrix<float> targets = one_hot<float>(a, data_.classes);
    if (options_.mixup.enabled)
      targets = (lambda * targets.cast<double>() + (1.0 - lambda) * one_hot<double>(b, data_.classes)).cast<float>();
    return task_loss_and_backward(net_, x, task_, &targets, nullptr);
  }

  std::vector<std::vector<WeightedBox>> boxes(n);
  for (Index k = 0; k < n; ++k) {
    for (const auto& bx : data_.boxes[indices[k]]) boxes[k].push_back({bx, options_.mixup.enabled ? lambda : 1.0});
    if (options_.mixup.enabled)
      for (const auto& bx : data_.boxes[partner[k]]) boxes[k].push_back({bx, 1.0 - lambda});
  }
  return task_loss_and_backward(net_, x, task_, nullptr, &boxes);
}

std::vector<EpochStats> Trainer::run(int epochs, std::mt19937_64& rng, const GradientHook& hook,
                                     const LayerMasks* masks, const LossHook& extra_loss) {
  std::vector<EpochStats> stats;
  std::vector<Index> order(static_cast<std::size_t>(data_.size()));
  const auto convs = net_.conv_layers();
  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0;
    for (std::int64_t b = 0; b < batches_per_epoch_; ++b) {
      const auto begin = b * options_.batch_size;
      const auto end = std::min<Index>(begin + options_.batch_size, data_.size());
      const std::span<const Index> idx(order.data() + begin, static_cast<std::size_t>(end - begin));
      const double lr = lr_at(std::min(step_, schedule_.total_batches), schedule_);
      double loss = batch_step(idx, rng);
      if (options_.clip_norm > 0) clip_gradients(net_, convs, options_.clip_norm);
      if (hook) hook(net_);
      if (extra_loss) loss += extra_loss();
      if (!std::isfinite(loss))
        throw Divergence("non-finite loss at epoch " + std::to_string(e) + ", batch " + std::to_string(b) +
                         " (lr " + std::to_string(lr) + ")");
      for (std::size_t k = 0; k < convs.size(); ++k) {
        auto& c = net_.conv(convs[k]);
        if (!c.grad_weight.allFinite() || !c.grad_bias.allFinite())
          throw Divergence("non-finite gradient in layer " + std::to_string(convs[k]));
        GemmMatrix<float> g = c.grad_weight + static_cast<float>(options_.weight_decay) * c.weight;
        if (masks)
          if (auto it = masks->find(convs[k]); it != masks->end()) g = apply_mask(g, it->second);
        velocity_w_[k] = static_cast<float>(options_.momentum) * velocity_w_[k] + g;
        velocity_b_[k] = static_cast<float>(options_.momentum) * velocity_b_[k] + c.grad_bias;
        c.weight -= static_cast<float>(lr) * velocity_w_[k];
        c.bias -= static_cast<float>(lr) * velocity_b_[k];
      }
      sum += loss;
      ++step_;
    }
    stats.push_back({sum / static_cast<double>(batches_per_epoch_)});
  }
  return stats;
}

double accuracy(const Network<float>& net, const Dataset& data) {
  constexpr Index kChunk = 256;
  Index correct = 0;
  std::vector<Index> idx;
  for (Index start = 0; start < data.size(); start += kChunk) {
    idx.clear();
    for (Index i = start; i < std::min(start + kChunk, data.size()); ++i) idx.push_back(i);
    const auto logits = net.infer(data.batch(idx));
    for (Index b = 0; b < logits.data.cols(); ++b) {
      Index arg = 0;
      logits.data.col(b).maxCoeff(&arg);
      correct += arg == data.labels[idx[b]] ? 1 : 0;
    }
  }
  return data.size() ? static_cast<double>(correct) / static_cast<double>(data.size()) : 0.0;
}

std::vector<ImageBoxes> predict_boxes(const Network<float>& net, const Dataset& data, const TaskSpec& task,
                                      const EvalOptions& eval) {
  constexpr Index kChunk = 64;
  std::vector<ImageBoxes> out;
  std::vector<Index> idx;
  const DecodeOptions decode{eval.score_threshold, eval.nms_iou, 20};
  for (Index start = 0; start < data.size(); start += kChunk) {
    idx.clear();
    for (Index i = start; i < std::min(start + kChunk, data.size()); ++i) idx.push_back(i);
    const auto head = net.infer(data.batch(idx));
    for (Index b = 0; b < head.batch; ++b)
      out.push_back({std::to_string(idx[b]), decode_detections(head, b, task.anchors, task.stride, decode)});
  }
  return out;
}

std::vector<EpochStats> train_network(Network<float>& net, const Dataset& data, const TaskSpec& task,
                                      const TrainOptions& options, std::mt19937_64& rng) {
  Trainer trainer(net, data, task, options);
  return trainer.run(options.epochs, rng);
}

void retrain(Network<float>& net, const Dataset& data, const TaskSpec& task, const TrainOptions& options,
             const LayerMasks& masks, std::mt19937_64& rng) {
  Trainer trainer(net, data, task, options);
  trainer.run(options.epochs, rng, {}, &masks);
}

std::string format_progress(const ProgressRecord& r, const std::vector<LayerConstraint>& constraints) {
  std::ostringstream os;
  os.precision(9);
  os << r.phase << " iter=" << r.iteration << " loss=" << r.loss;
  for (std::size_t i = 0; i < r.residuals.size(); ++i)
    os << " residual[" << (i < constraints.size() ? constraints[i].layer : static_cast<Index>(i)) << "]=" << r.residuals[i];
  return os.str();
}

namespace {

struct AdmmRun {
  std::vector<SparsityConstraint> constraints;
  std::vector<std::optional<std::vector<char>>> row_locks;
  const LayerMasks* gradient_masks = nullptr;
};

std::vector<GemmMatrix<float>> layer_weights(const Network<float>& net, const std::vector<LayerConstraint>& lc) {
  std::vector<GemmMatrix<float>> out;
  for (const auto& c : lc) out.push_back(net.conv(c.layer).weight);
  return out;
}

LayerMasks pre_prune_and_map(Network<float>& net, const Dataset& data, const TaskSpec& task,
                             const PruneSchedule& schedule, const std::vector<LayerConstraint>& lc, const AdmmRun& run,
                             const std::string& phase, std::mt19937_64& rng, const PipelineHooks& hooks,
                             PipelineResult& result) {
  auto state = init_admm_state(layer_weights(net, lc), run.constraints, schedule.rho, run.row_locks);
  TrainOptions opts = schedule.admm_train;
  opts.epochs = schedule.admm_iterations * schedule.epochs_per_iteration;
  Trainer trainer(net, data, task, opts);

  const auto hook = [&](Network<float>& n) {
    for (std::size_t i = 0; i < lc.size(); ++i) {
      auto& c = n.conv(lc[i].layer);
      const auto& l = state.layers[i];
      c.grad_weight += static_cast<float>(state.rho) * (c.weight - l.z + l.u);
    }
  };
  const auto penalty = [&]() {
    double total = 0;
    for (std::size_t i = 0; i < lc.size(); ++i) {
      const auto& l = state.layers[i];
      total += (net.conv(lc[i].layer).weight - l.z + l.u).cast<double>().squaredNorm();
    }
    return 0.5 * state.rho * total;
  };

  for (int k = 0; k < schedule.admm_iterations; ++k) {
    const auto stats = trainer.run(schedule.epochs_per_iteration, rng, hook, run.gradient_masks, penalty);
    for (const auto& s : stats) result.loss_trajectory.push_back(s.mean_loss);
    for (std::size_t i = 0; i < lc.size(); ++i) state.layers[i].w = net.conv(lc[i].layer).weight;
    auto next = admm_step(state, run.constraints);
    if (hooks.on_admm_step) hooks.on_admm_step(state, next, run.constraints);
    state = std::move(next);
    ProgressRecord rec{phase, state.iteration, stats.back().mean_loss, primal_residuals(state)};
    if (hooks.on_progress) hooks.on_progress(rec);
    result.progress.push_back(std::move(rec));
  }
  if (hooks.on_phase) hooks.on_phase(phase, net, run.gradient_masks ? *run.gradient_masks : LayerMasks{});

  auto mapped = masked_mapping(layer_weights(net, lc), run.constraints, run.row_locks);
  LayerMasks masks;
  for (std::size_t i = 0; i < lc.size(); ++i) {
    net.conv(lc[i].layer).weight = mapped.weights[i];
    masks.emplace(lc[i].layer, std::move(mapped.masks[i]));
  }
  return masks;
}

}  // namespace

PipelineResult run_pipeline(Network<float>& net, const Dataset& data, const TaskSpec& task,
                            const PruneSchedule& schedule, std::mt19937_64& rng, const PipelineHooks& hooks) {
  schedule.validate(net.manifest());
  const auto& lc = schedule.constraints;
  PipelineResult result;

  const bool sequential = schedule.combined_strategy == CombinedStrategy::Sequential &&
                          std::any_of(lc.begin(), lc.end(), [](const LayerConstraint& c) {
                            return c.constraint.mode == SparsityMode::Combined;
                          });

  LayerMasks masks;
  if (sequential) {
    AdmmRun filter_stage;
    for (const auto& c : lc)
      filter_stage.constraints.push_back(c.constraint.mode == SparsityMode::Combined
                                             ? SparsityConstraint::filters(c.constraint.alpha_filters)
                                             : c.constraint);
    const LayerMasks filter_masks =
        pre_prune_and_map(net, data, task, schedule, lc, filter_stage, "preprune-filter", rng, hooks, result);
    if (hooks.on_phase) hooks.on_phase("mapped-filter", net, filter_masks);

    AdmmRun column_stage;
    column_stage.gradient_masks = &filter_masks;
    for (const auto& c : lc) {
      if (c.constraint.mode == SparsityMode::Combined) {
        const auto& fm = filter_masks.at(c.layer);
        std::vector<char> rows(fm.rows());
        for (Index r = 0; r < fm.rows(); ++r) rows[r] = fm.bits.row(r).maxCoeff() != 0;
        column_stage.constraints.push_back(SparsityConstraint::columns(c.constraint.alpha_columns));
        column_stage.row_locks.emplace_back(std::move(rows));
      } else {
        column_stage.constraints.push_back(c.constraint);
        column_stage.row_locks.emplace_back(std::nullopt);
      }
    }
    masks = pre_prune_and_map(net, data, task, schedule, lc, column_stage, "preprune-column", rng, hooks, result);
  } else {
    AdmmRun joint;
    for (const auto& c : lc) joint.constraints.push_back(c.constraint);
    masks = pre_prune_and_map(net, data, task, schedule, lc, joint, "preprune", rng, hooks, result);
  }
  if (hooks.on_phase) hooks.on_phase("mapped", net, masks);

  TrainOptions opts = schedule.retrain;
  opts.epochs = schedule.retrain_epochs;
  Trainer trainer(net, data, task, opts);
  for (const auto& s : trainer.run(opts.epochs, rng, {}, &masks)) result.loss_trajectory.push_back(s.mean_loss);
  if (hooks.on_phase) hooks.on_phase("retrained", net, masks);

  result.feasible = true;
  for (const auto& c : lc) {
    const auto& w = net.conv(c.layer).weight;
    const bool ok = is_feasible(w, c.constraint) && apply_mask(w, masks.at(c.layer)) == w;
    result.layer_feasible.push_back(ok);
    result.feasible = result.feasible && ok;
  }
  result.masks = std::move(masks);
  return result;
}

}  // namespace structprune
