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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "structprune/tensor.hpp"

namespace structprune {

enum class SparsityMode { Irregular, Filter, Column, Combined };

std::string to_string(SparsityMode mode);
SparsityMode parse_sparsity_mode(const std::string& s);

/// Retained-count constraint for one layer. Only the counts relevant to
/// `mode` are read.
struct SparsityConstraint {
  SparsityMode mode = SparsityMode::Irregular;
  Index alpha_filters = 0;
  Index alpha_columns = 0;
  Index alpha_weights = 0;

  static SparsityConstraint irregular(Index alpha) { return {SparsityMode::Irregular, 0, 0, alpha}; }
  static SparsityConstraint filters(Index alpha) { return {SparsityMode::Filter, alpha, 0, 0}; }
  static SparsityConstraint columns(Index alpha) { return {SparsityMode::Column, 0, alpha, 0}; }
  static SparsityConstraint combined(Index alpha_f, Index alpha_c) {
    return {SparsityMode::Combined, alpha_f, alpha_c, 0};
  }
  /// No-op constraint for a rows x cols layer.
  static SparsityConstraint identity(SparsityMode mode, Index rows, Index cols) {
    return {mode, rows, cols, rows * cols};
  }

  /// Throws InvalidArgument when a relevant count is outside [0, dimension].
  void validate(Index rows, Index cols) const;

  bool operator==(const SparsityConstraint&) const = default;
};

/// Converts a retention ratio in [0, 1] to a count: floor(ratio * dim), at
/// least 1 when ratio > 0.
Index retained_count(double ratio, Index dimension);

using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Binary retain pattern congruent to a layer's GEMM matrix; 1 = retained.
struct SparsityMask {
  SparsityMode mode = SparsityMode::Irregular;
  MaskMatrix bits;

  Index rows() const { return bits.rows(); }
  Index cols() const { return bits.cols(); }
  Index popcount() const { return bits.template cast<Index>().sum(); }
  bool operator==(const SparsityMask& o) const { return mode == o.mode && bits == o.bits; }

  static SparsityMask ones(SparsityMode mode, Index rows, Index cols) {
    return {mode, MaskMatrix::Ones(rows, cols)};
  }
  static SparsityMask outer(SparsityMode mode, const std::vector<char>& row_keep, const std::vector<char>& col_keep);
};

/// Indices of rows (resp. columns) that contain at least one retained entry.
std::vector<Index> retained_rows(const SparsityMask& mask);
std::vector<Index> retained_cols(const SparsityMask& mask);

/// True when the mask is the outer AND of a row mask and a column mask, with
/// the restriction its mode implies (Filter: full columns, Column: full rows).
/// Irregular masks never qualify.
bool mask_is_structured(const SparsityMask& mask);

template <typename Scalar>
struct Projection {
  GemmMatrix<Scalar> weights;
  SparsityMask mask;
};

namespace detail {

/// Indices of the k largest scores, ties broken by lower index, returned in
/// ascending index order.
inline std::vector<Index> top_k(const std::vector<double>& scores, Index k) {
  std::vector<Index> order(scores.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

inline std::vector<char> membership(const std::vector<Index>& idx, Index n) {
  std::vector<char> keep(static_cast<std::size_t>(n), 0);
  for (Index i : idx) keep[i] = 1;
  return keep;
}

inline void check_alpha(Index alpha, Index bound, const char* what) {
  if (alpha < 0 || alpha > bound)
    throw InvalidArgument(std::string(what) + " alpha " + std::to_string(alpha) + " outside [0, " +
                          std::to_string(bound) + "]");
}

template <typename Derived>
std::vector<double> row_sq_norms(const Eigen::MatrixBase<Derived>& m) {
  std::vector<double> out(m.rows());
  for (Index r = 0; r < m.rows(); ++r) out[r] = m.row(r).template cast<double>().squaredNorm();
  return out;
}

template <typename Derived>
std::vector<double> col_sq_norms(const Eigen::MatrixBase<Derived>& m) {
  std::vector<double> out(m.cols());
  for (Index c = 0; c < m.cols(); ++c) out[c] = m.col(c).template cast<double>().squaredNorm();
  return out;
}

}  // namespace detail

/// Keeps the `alpha` entries of largest magnitude (ties: lower flat index).
template <typename Derived>
Projection<typename Derived::Scalar> project_irregular_masked(const Eigen::MatrixBase<Derived>& m, Index alpha) {
  using Scalar = typename Derived::Scalar;
  detail::check_alpha(alpha, m.size(), "irregular");
  const GemmMatrix<Scalar> dense = m;
  std::vector<double> mags(dense.size());
  for (Index i = 0; i < dense.size(); ++i) mags[i] = std::abs(static_cast<double>(dense.data()[i]));
  Projection<Scalar> out{GemmMatrix<Scalar>::Zero(m.rows(), m.cols()),
                         {SparsityMode::Irregular, MaskMatrix::Zero(m.rows(), m.cols())}};
  for (Index i : detail::top_k(mags, alpha)) {
    out.weights.data()[i] = dense.data()[i];
    out.mask.bits.data()[i] = 1;
  }
  return out;
}

template <typename Derived>
GemmMatrix<typename Derived::Scalar> project_irregular(const Eigen::MatrixBase<Derived>& m, Index alpha) {
  return project_irregular_masked(m, alpha).weights;
}

/// Keeps the `alpha` rows (filters) of largest l2 norm.
template <typename Derived>
Projection<typename Derived::Scalar> project_filters(const Eigen::MatrixBase<Derived>& m, Index alpha) {
  using Scalar = typename Derived::Scalar;
  detail::check_alpha(alpha, m.rows(), "filter");
  const auto rows = detail::membership(detail::top_k(detail::row_sq_norms(m), alpha), m.rows());
  Projection<Scalar> out{GemmMatrix<Scalar>::Zero(m.rows(), m.cols()),
                         SparsityMask::outer(SparsityMode::Filter, rows, std::vector<char>(m.cols(), 1))};
  for (Index r = 0; r < m.rows(); ++r)
    if (rows[r]) out.weights.row(r) = m.row(r);
  return out;
}

/// Keeps the `alpha` GEMM columns of largest l2 norm.
template <typename Derived>
Projection<typename Derived::Scalar> project_columns(const Eigen::MatrixBase<Derived>& m, Index alpha) {
  using Scalar = typename Derived::Scalar;
  detail::check_alpha(alpha, m.cols(), "column");
  const auto cols = detail::membership(detail::top_k(detail::col_sq_norms(m), alpha), m.cols());
  Projection<Scalar> out{GemmMatrix<Scalar>::Zero(m.rows(), m.cols()),
                         SparsityMask::outer(SparsityMode::Column, std::vector<char>(m.rows(), 1), cols)};
  for (Index c = 0; c < m.cols(); ++c)
    if (cols[c]) out.weights.col(c) = m.col(c);
  return out;
}

/// Column projection restricted to the rows a previous filter mask kept.
/// Column norms only see surviving rows; the result mask is Combined.
template <typename Derived>
Projection<typename Derived::Scalar> project_columns_within(const Eigen::MatrixBase<Derived>& m,
                                                            const std::vector<char>& row_keep, Index alpha) {
  using Scalar = typename Derived::Scalar;
  if (static_cast<Index>(row_keep.size()) != m.rows())
    throw ShapeMismatch("row mask length does not match matrix rows");
  GemmMatrix<Scalar> filtered = GemmMatrix<Scalar>::Zero(m.rows(), m.cols());
  for (Index r = 0; r < m.rows(); ++r)
    if (row_keep[r]) filtered.row(r) = m.row(r);
  auto cols = project_columns(filtered, alpha);
  std::vector<char> col_keep(m.cols(), 0);
  for (Index c = 0; c < m.cols() && m.rows() > 0; ++c) col_keep[c] = cols.mask.bits(0, c);
  return {std::move(cols.weights), SparsityMask::outer(SparsityMode::Combined, row_keep, col_keep)};
}

/// Filter projection followed by column projection on the filter-masked matrix.
template <typename Derived>
Projection<typename Derived::Scalar> project_combined(const Eigen::MatrixBase<Derived>& m,
                                                      const SparsityConstraint& c) {
  if (c.mode != SparsityMode::Combined) throw InvalidArgument("project_combined requires a Combined constraint");
  c.validate(m.rows(), m.cols());
  auto filtered = project_filters(m, c.alpha_filters);
  std::vector<char> row_keep(m.rows());
  for (Index r = 0; r < m.rows(); ++r) row_keep[r] = m.cols() > 0 && filtered.mask.bits(r, 0) != 0;
  return project_columns_within(filtered.weights, row_keep, c.alpha_columns);
}

/// Euclidean projection onto the constraint set selected by `c.mode`.
template <typename Derived>
Projection<typename Derived::Scalar> project(const Eigen::MatrixBase<Derived>& m, const SparsityConstraint& c) {
  c.validate(m.rows(), m.cols());
  switch (c.mode) {
    case SparsityMode::Irregular: return project_irregular_masked(m, c.alpha_weights);
    case SparsityMode::Filter: return project_filters(m, c.alpha_filters);
    case SparsityMode::Column: return project_columns(m, c.alpha_columns);
    case SparsityMode::Combined: return project_combined(m, c);
  }
  throw InvalidArgument("unknown sparsity mode");
}

template <typename Derived>
GemmMatrix<typename Derived::Scalar> apply_mask(const Eigen::MatrixBase<Derived>& m, const SparsityMask& mask) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != mask.rows() || m.cols() != mask.cols())
    throw ShapeMismatch("apply_mask: matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                        " vs mask " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()));
  return m.cwiseProduct(mask.bits.template cast<Scalar>());
}

/// Direct-count feasibility: number of nonzero groups does not exceed alpha.
template <typename Derived>
bool is_feasible(const Eigen::MatrixBase<Derived>& m, const SparsityConstraint& c) {
  using Scalar = typename Derived::Scalar;
  Index nz_rows = 0, nz_cols = 0, nz = 0;
  for (Index r = 0; r < m.rows(); ++r) nz_rows += (m.row(r).array() != Scalar(0)).any() ? 1 : 0;
  for (Index col = 0; col < m.cols(); ++col) nz_cols += (m.col(col).array() != Scalar(0)).any() ? 1 : 0;
  nz = (m.array() != Scalar(0)).count();
  switch (c.mode) {
    case SparsityMode::Irregular: return nz <= c.alpha_weights;
    case SparsityMode::Filter: return nz_rows <= c.alpha_filters;
    case SparsityMode::Column: return nz_cols <= c.alpha_columns;
    case SparsityMode::Combined: return nz_rows <= c.alpha_filters && nz_cols <= c.alpha_columns;
  }
  return false;
}

}  // namespace structprune
