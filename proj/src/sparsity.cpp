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

#include "structprune/sparsity.hpp"

namespace structprune {

std::string to_string(SparsityMode mode) {
  switch (mode) {
    case SparsityMode::Irregular: return "irregular";
    case SparsityMode::Filter: return "filter";
    case SparsityMode::Column: return "column";
    case SparsityMode::Combined: return "combined";
  }
  return "unknown";
}

SparsityMode parse_sparsity_mode(const std::string& s) {
  if (s == "irregular") return SparsityMode::Irregular;
  if (s == "filter") return SparsityMode::Filter;
  if (s == "column") return SparsityMode::Column;
  if (s == "combined") return SparsityMode::Combined;
  throw InvalidArgument("unknown sparsity mode '" + s + "'");
}

void SparsityConstraint::validate(Index rows, Index cols) const {
  switch (mode) {
    case SparsityMode::Irregular: detail::check_alpha(alpha_weights, rows * cols, "irregular"); break;
    case SparsityMode::Filter: detail::check_alpha(alpha_filters, rows, "filter"); break;
    case SparsityMode::Column: detail::check_alpha(alpha_columns, cols, "column"); break;
    case SparsityMode::Combined:
      detail::check_alpha(alpha_filters, rows, "filter");
      detail::check_alpha(alpha_columns, cols, "column");
      break;
  }
}

Index retained_count(double ratio, Index dimension) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw InvalidArgument("retention ratio must lie in [0, 1]");
  if (ratio == 0.0) return 0;
  const auto n = static_cast<Index>(std::floor(ratio * static_cast<double>(dimension)));
  return std::max<Index>(n, 1);
}

SparsityMask SparsityMask::outer(SparsityMode mode, const std::vector<char>& row_keep,
                                 const std::vector<char>& col_keep) {
  SparsityMask m{mode, MaskMatrix::Zero(static_cast<Index>(row_keep.size()), static_cast<Index>(col_keep.size()))};
  for (std::size_t r = 0; r < row_keep.size(); ++r)
    for (std::size_t c = 0; c < col_keep.size(); ++c) m.bits(r, c) = (row_keep[r] && col_keep[c]) ? 1 : 0;
  return m;
}

std::vector<Index> retained_rows(const SparsityMask& mask) {
  std::vector<Index> out;
  for (Index r = 0; r < mask.rows(); ++r)
    if (mask.bits.row(r).maxCoeff() != 0) out.push_back(r);
  return out;
}

std::vector<Index> retained_cols(const SparsityMask& mask) {
  std::vector<Index> out;
  for (Index c = 0; c < mask.cols(); ++c)
    if (mask.rows() > 0 && mask.bits.col(c).maxCoeff() != 0) out.push_back(c);
  return out;
}

bool mask_is_structured(const SparsityMask& mask) {
  if (mask.mode == SparsityMode::Irregular) return false;
  if ((mask.bits.array() > 1).any()) return false;
  const auto rows = detail::membership(retained_rows(mask), mask.rows());
  const auto cols = detail::membership(retained_cols(mask), mask.cols());
  if (!(SparsityMask::outer(mask.mode, rows, cols).bits == mask.bits)) return false;
  const bool any = mask.popcount() > 0;
  switch (mask.mode) {
    case SparsityMode::Filter:
      return !any || static_cast<Index>(retained_cols(mask).size()) == mask.cols();
    case SparsityMode::Column:
      return !any || static_cast<Index>(retained_rows(mask).size()) == mask.rows();
    default:
      return true;
  }
}

}  // namespace structprune
