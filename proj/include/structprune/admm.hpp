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

#include <cmath>
#include <optional>
#include <vector>

#include "structprune/sparsity.hpp"

namespace structprune {

/// W, Z (auxiliary, always feasible) and U (scaled dual) for one layer.
/// When `row_lock` is set, the projection only sees the rows it keeps; used
/// by the column stage of sequential combined pruning.
template <typename Scalar>
struct AdmmLayer {
  GemmMatrix<Scalar> w;
  GemmMatrix<Scalar> z;
  GemmMatrix<Scalar> u;
  std::optional<std::vector<char>> row_lock;
};

template <typename Scalar>
struct AdmmState {
  std::vector<AdmmLayer<Scalar>> layers;
  double rho = 1e-3;
  int iteration = 0;
};

/// Projection used for both the Z-update and masked mapping.
template <typename Derived>
Projection<typename Derived::Scalar> constrained_projection(const Eigen::MatrixBase<Derived>& m,
                                                            const SparsityConstraint& c,
                                                            const std::optional<std::vector<char>>& row_lock) {
  if (!row_lock) return project(m, c);
  if (c.mode != SparsityMode::Column)
    throw InvalidArgument("row-locked projection is only defined for the column stage");
  c.validate(m.rows(), m.cols());
  return project_columns_within(m, *row_lock, c.alpha_columns);
}

/// Z0 = project(W0), U0 = 0.
template <typename Scalar>
AdmmState<Scalar> init_admm_state(const std::vector<GemmMatrix<Scalar>>& weights,
                                  const std::vector<SparsityConstraint>& constraints, double rho,
                                  const std::vector<std::optional<std::vector<char>>>& row_locks = {}) {
  if (weights.size() != constraints.size())
    throw InvalidArgument("one constraint per prunable layer is required");
  if (!(rho > 0)) throw InvalidArgument("rho must be positive");
  AdmmState<Scalar> state;
  state.rho = rho;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    AdmmLayer<Scalar> layer;
    if (i < row_locks.size()) layer.row_lock = row_locks[i];
    layer.w = weights[i];
    layer.z = constrained_projection(weights[i], constraints[i], layer.row_lock).weights;
    layer.u = GemmMatrix<Scalar>::Zero(weights[i].rows(), weights[i].cols());
    state.layers.push_back(std::move(layer));
  }
  return state;
}

/// sum_i (rho/2) ||W_i - Z_i + U_i||_F^2, accumulated in double.
template <typename Scalar>
double admm_penalty(const AdmmState<Scalar>& state) {
  double total = 0.0;
  for (const auto& l : state.layers) total += (l.w - l.z + l.u).template cast<double>().squaredNorm();
  return 0.5 * state.rho * total;
}

/// Task loss plus the ADMM penalty. Throws Divergence on a non-finite result.
template <typename Scalar>
double augmented_loss(double task_loss, const AdmmState<Scalar>& state) {
  const double loss = task_loss + admm_penalty(state);
  if (!std::isfinite(loss))
    throw Divergence("augmented loss is not finite at ADMM iteration " + std::to_string(state.iteration));
  return loss;
}

/// d/dW of the penalty for one layer: rho (W - Z + U).
template <typename Scalar>
GemmMatrix<Scalar> penalty_gradient(const AdmmState<Scalar>& state, std::size_t layer) {
  const auto& l = state.layers.at(layer);
  return Scalar(state.rho) * (l.w - l.z + l.u);
}

/// Z <- project(W + U), U <- (U + W) - Z, iteration + 1. The caller must
/// have refreshed every `w` from the network first.
template <typename Scalar>
AdmmState<Scalar> admm_step(AdmmState<Scalar> state, const std::vector<SparsityConstraint>& constraints) {
  if (constraints.size() != state.layers.size())
    throw InvalidArgument("one constraint per prunable layer is required");
  for (std::size_t i = 0; i < state.layers.size(); ++i) {
    auto& l = state.layers[i];
    const GemmMatrix<Scalar> shifted = l.u + l.w;
    l.z = constrained_projection(shifted, constraints[i], l.row_lock).weights;
    l.u = shifted - l.z;
  }
  ++state.iteration;
  return state;
}

template <typename Scalar>
struct MappedWeights {
  std::vector<GemmMatrix<Scalar>> weights;
  std::vector<SparsityMask> masks;
};

/// Hard projection of every layer onto its constraint set.
template <typename Scalar>
MappedWeights<Scalar> masked_mapping(const std::vector<GemmMatrix<Scalar>>& weights,
                                     const std::vector<SparsityConstraint>& constraints,
                                     const std::vector<std::optional<std::vector<char>>>& row_locks = {}) {
  if (weights.size() != constraints.size())
    throw InvalidArgument("one constraint per prunable layer is required");
  MappedWeights<Scalar> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const std::optional<std::vector<char>> lock = i < row_locks.size() ? row_locks[i] : std::nullopt;
    auto p = constrained_projection(weights[i], constraints[i], lock);
    out.weights.push_back(std::move(p.weights));
    out.masks.push_back(std::move(p.mask));
  }
  return out;
}

/// ||W_i - Z_i||_F per layer (primal residual).
template <typename Scalar>
std::vector<double> primal_residuals(const AdmmState<Scalar>& state) {
  std::vector<double> out;
  for (const auto& l : state.layers) out.push_back(std::sqrt((l.w - l.z).template cast<double>().squaredNorm()));
  return out;
}

}  // namespace structprune
