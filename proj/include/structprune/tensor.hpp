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

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "structprune/errors.hpp"

namespace structprune {

using Index = Eigen::Index;

/// Row-major dense matrix. For a convolution weight the rows are filters and
/// the columns are the flattened (channel, kh, kw) receptive field.
template <typename Scalar>
using GemmMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXf = GemmMatrix<float>;
using MatrixXd = GemmMatrix<double>;

/// (filters, channels, kernel_h, kernel_w)
struct WeightShape {
  Index filters = 1;
  Index channels = 1;
  Index kernel_h = 1;
  Index kernel_w = 1;

  Index size() const { return filters * channels * kernel_h * kernel_w; }
  Index gemm_cols() const { return channels * kernel_h * kernel_w; }
  bool valid() const { return filters >= 1 && channels >= 1 && kernel_h >= 1 && kernel_w >= 1; }
  bool operator==(const WeightShape&) const = default;

  std::string str() const {
    return "(" + std::to_string(filters) + "," + std::to_string(channels) + "," +
           std::to_string(kernel_h) + "," + std::to_string(kernel_w) + ")";
  }
};

/// 4-D convolution weight stored flat in (F, C, KH, KW) row-major order.
template <typename Scalar>
struct WeightTensor {
  WeightShape shape;
  Vector<Scalar> data;

  WeightTensor() = default;
  WeightTensor(WeightShape s, Vector<Scalar> d) : shape(s), data(std::move(d)) {
    if (!shape.valid()) throw ShapeMismatch("weight shape " + shape.str() + " has a zero extent");
    if (data.size() != shape.size())
      throw ShapeMismatch("weight data length " + std::to_string(data.size()) +
                          " does not match shape " + shape.str());
  }

  static WeightTensor zeros(WeightShape s) { return WeightTensor(s, Vector<Scalar>::Zero(s.size())); }

  Scalar& operator()(Index f, Index c, Index i, Index j) { return data[offset(f, c, i, j)]; }
  Scalar operator()(Index f, Index c, Index i, Index j) const { return data[offset(f, c, i, j)]; }

  bool all_finite() const { return data.allFinite(); }

 private:
  Index offset(Index f, Index c, Index i, Index j) const {
    return ((f * shape.channels + c) * shape.kernel_h + i) * shape.kernel_w + j;
  }
};

/// Lowers a weight tensor to its GEMM view: row f holds filter f, and entry
/// (f, c*KH*KW + i*KW + j) is w[f, c, i, j].
template <typename Scalar>
GemmMatrix<Scalar> to_gemm(const WeightTensor<Scalar>& w) {
  return Eigen::Map<const GemmMatrix<Scalar>>(w.data.data(), w.shape.filters, w.shape.gemm_cols());
}

template <typename Derived>
WeightTensor<typename Derived::Scalar> from_gemm(const Eigen::MatrixBase<Derived>& m, WeightShape shape) {
  using Scalar = typename Derived::Scalar;
  if (!shape.valid() || m.rows() != shape.filters || m.cols() != shape.gemm_cols())
    throw ShapeMismatch("cannot view " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                        " matrix as weight tensor " + shape.str());
  Vector<Scalar> data(shape.size());
  Eigen::Map<GemmMatrix<Scalar>>(data.data(), m.rows(), m.cols()) = m;
  return WeightTensor<Scalar>(shape, std::move(data));
}

/// Matrix product with a fixed summation order: every output element is
/// accumulated over the inner dimension from index 0 upward, starting at 0.
template <typename DerivedA, typename DerivedB>
GemmMatrix<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  static_assert(std::is_same_v<Scalar, typename DerivedB::Scalar>, "matmul operands must share a scalar type");
  if (a.cols() != b.rows())
    throw DimensionMismatch("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " times " +
                            std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  const GemmMatrix<Scalar> lhs = a;
  const GemmMatrix<Scalar> rhs = b;
  GemmMatrix<Scalar> out = GemmMatrix<Scalar>::Zero(a.rows(), b.cols());
  for (Index i = 0; i < lhs.rows(); ++i)
    for (Index k = 0; k < lhs.cols(); ++k) out.row(i) += lhs(i, k) * rhs.row(k);
  return out;
}

/// Dense block of the retained rows/columns of a structurally sparse matrix.
template <typename Scalar>
struct CompactedMatrix {
  GemmMatrix<Scalar> dense;
  std::vector<Index> row_index;
  std::vector<Index> col_index;
  Index original_rows = 0;
  Index original_cols = 0;
};

namespace detail {

inline void check_index_list(const std::vector<Index>& idx, Index bound, const char* what) {
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= bound)
      throw IndexOutOfBounds(std::string("compact: ") + what + " index " + std::to_string(idx[i]) +
                             " outside [0, " + std::to_string(bound) + ")");
    if (i > 0 && idx[i] <= idx[i - 1])
      throw InvalidArgument(std::string("compact: ") + what + " indices must be strictly increasing");
  }
}

}  // namespace detail

/// Extracts the kept rows/columns. Every entry outside the kept block must be
/// exactly zero; otherwise NonzeroDiscard is thrown.
template <typename Derived>
CompactedMatrix<typename Derived::Scalar> compact(const Eigen::MatrixBase<Derived>& m,
                                                  const std::vector<Index>& keep_rows,
                                                  const std::vector<Index>& keep_cols) {
  using Scalar = typename Derived::Scalar;
  detail::check_index_list(keep_rows, m.rows(), "row");
  detail::check_index_list(keep_cols, m.cols(), "column");

  std::vector<char> row_kept(m.rows(), 0), col_kept(m.cols(), 0);
  for (Index r : keep_rows) row_kept[r] = 1;
  for (Index c : keep_cols) col_kept[c] = 1;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      if (!(row_kept[r] && col_kept[c]) && m(r, c) != Scalar(0))
        throw NonzeroDiscard("compact: entry (" + std::to_string(r) + "," + std::to_string(c) +
                             ") is nonzero but not retained");

  CompactedMatrix<Scalar> out;
  out.row_index = keep_rows;
  out.col_index = keep_cols;
  out.original_rows = m.rows();
  out.original_cols = m.cols();
  out.dense.resize(static_cast<Index>(keep_rows.size()), static_cast<Index>(keep_cols.size()));
  for (std::size_t i = 0; i < keep_rows.size(); ++i)
    for (std::size_t j = 0; j < keep_cols.size(); ++j) out.dense(i, j) = m(keep_rows[i], keep_cols[j]);
  return out;
}

/// Re-inserts the dense block into a zero matrix of the original size.
template <typename Scalar>
GemmMatrix<Scalar> expand(const CompactedMatrix<Scalar>& c) {
  GemmMatrix<Scalar> out = GemmMatrix<Scalar>::Zero(c.original_rows, c.original_cols);
  for (std::size_t i = 0; i < c.row_index.size(); ++i)
    for (std::size_t j = 0; j < c.col_index.size(); ++j) out(c.row_index[i], c.col_index[j]) = c.dense(i, j);
  return out;
}

/// Gathers the rows of `x` selected by `c.col_index`, multiplies by the dense
/// block and scatters the result back to `c.original_rows` rows (zeros for
/// dropped rows). Equals expand(c) * x.
template <typename Scalar, typename Derived>
GemmMatrix<Scalar> compact_matmul(const CompactedMatrix<Scalar>& c, const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() != c.original_cols)
    throw DimensionMismatch("compact_matmul: operand has " + std::to_string(x.rows()) + " rows, expected " +
                            std::to_string(c.original_cols));
  GemmMatrix<Scalar> gathered(static_cast<Index>(c.col_index.size()), x.cols());
  for (std::size_t j = 0; j < c.col_index.size(); ++j) gathered.row(j) = x.row(c.col_index[j]);
  GemmMatrix<Scalar> partial = c.dense * gathered;
  GemmMatrix<Scalar> out = GemmMatrix<Scalar>::Zero(c.original_rows, x.cols());
  for (std::size_t i = 0; i < c.row_index.size(); ++i) out.row(c.row_index[i]) = partial.row(i);
  return out;
}

}  // namespace structprune
