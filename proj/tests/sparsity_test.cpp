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

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "structprune/sparsity.hpp"

namespace sp = structprune;
using sp::Index;
using sp::SparsityConstraint;
using sp::SparsityMode;

namespace {

sp::MatrixXd integer_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(-3, 3);
  sp::MatrixXd m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

sp::MatrixXf gaussian(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<float> n;
  sp::MatrixXf m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST(RetainedCount, FloorWithMinimumOne) {
  EXPECT_EQ(sp::retained_count(0.5, 32), 16);
  EXPECT_EQ(sp::retained_count(0.5, 9), 4);
  EXPECT_EQ(sp::retained_count(0.01, 9), 1);
  EXPECT_EQ(sp::retained_count(0.0, 9), 0);
  EXPECT_EQ(sp::retained_count(1.0, 9), 9);
  EXPECT_THROW(sp::retained_count(1.5, 9), sp::InvalidArgument);
  EXPECT_THROW(sp::retained_count(-0.1, 9), sp::InvalidArgument);
}

TEST(Constraint, ValidateChecksRelevantCounts) {
  EXPECT_NO_THROW(SparsityConstraint::filters(4).validate(4, 10));
  EXPECT_THROW(SparsityConstraint::filters(5).validate(4, 10), sp::InvalidArgument);
  EXPECT_THROW(SparsityConstraint::columns(11).validate(4, 10), sp::InvalidArgument);
  EXPECT_THROW(SparsityConstraint::irregular(-1).validate(4, 10), sp::InvalidArgument);
  EXPECT_THROW(SparsityConstraint::combined(2, 11).validate(4, 10), sp::InvalidArgument);
}

TEST(Mode, ParseRoundTrip) {
  for (auto m : {SparsityMode::Irregular, SparsityMode::Filter, SparsityMode::Column, SparsityMode::Combined})
    EXPECT_EQ(sp::parse_sparsity_mode(sp::to_string(m)), m);
  EXPECT_THROW(sp::parse_sparsity_mode("rows"), sp::InvalidArgument);
}

TEST(TopK, TiesGoToLowerIndex) {
  EXPECT_EQ(sp::detail::top_k({1, 2, 2, 2, 0}, 2), (std::vector<Index>{1, 2}));
  EXPECT_EQ(sp::detail::top_k({5, 5, 5}, 1), (std::vector<Index>{0}));
  EXPECT_EQ(sp::detail::top_k({0, 3, 1, 3}, 3), (std::vector<Index>{1, 2, 3}));
}

TEST(ProjectFilters, MatchesExhaustiveSupportSearch) {
  std::mt19937_64 rng(21);
  for (Index r = 1; r <= 5; ++r)
    for (Index c = 1; c <= 5; ++c)
      for (int rep = 0; rep < 4; ++rep) {
        const auto m = integer_matrix(r, c, rng);
        for (Index k = 0; k <= r; ++k) {
          const auto p = sp::project_filters(m, k);
          const auto want = oracle::best_support(m, k, true);
          EXPECT_EQ(sp::retained_rows(p.mask).size() <= static_cast<std::size_t>(k), true);
          const auto keep = oracle::indicator(want, r);
          for (Index i = 0; i < r; ++i) {
            EXPECT_EQ(p.mask.bits(i, 0), keep[i]) << "row " << i << " k " << k;
            if (keep[i]) EXPECT_EQ(p.weights.row(i), m.row(i));
            else EXPECT_TRUE(p.weights.row(i).isZero(0));
          }
        }
      }
}

TEST(ProjectColumns, MatchesExhaustiveSupportSearch) {
  std::mt19937_64 rng(22);
  for (Index r = 1; r <= 5; ++r)
    for (Index c = 1; c <= 5; ++c)
      for (int rep = 0; rep < 4; ++rep) {
        const auto m = integer_matrix(r, c, rng);
        for (Index k = 0; k <= c; ++k) {
          const auto p = sp::project_columns(m, k);
          const auto keep = oracle::indicator(oracle::best_support(m, k, false), c);
          for (Index j = 0; j < c; ++j) {
            EXPECT_EQ(p.mask.bits(0, j), keep[j]);
            if (keep[j]) EXPECT_EQ(p.weights.col(j), m.col(j));
            else EXPECT_TRUE(p.weights.col(j).isZero(0));
          }
        }
      }
}

TEST(ProjectIrregular, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 30; ++rep) {
    const auto m = gaussian(3, 3, rng);
    for (Index k = 0; k <= 9; ++k) EXPECT_EQ(sp::project_irregular(m, k), oracle::best_sparse_approximation(m, k));
  }
}

TEST(Projection, IsIdempotentAndFeasible) {
  std::mt19937_64 rng(24);
  for (int rep = 0; rep < 50; ++rep) {
    const auto m = gaussian(6, 8, rng);
    for (const auto& c : {SparsityConstraint::irregular(17), SparsityConstraint::filters(3),
                          SparsityConstraint::columns(5), SparsityConstraint::combined(4, 3)}) {
      const auto p = sp::project(m, c);
      EXPECT_TRUE(sp::is_feasible(p.weights, c));
      EXPECT_EQ(sp::project(p.weights, c).weights, p.weights);
      EXPECT_EQ(sp::apply_mask(m, p.mask), p.weights);
      EXPECT_EQ(sp::mask_is_structured(p.mask), c.mode != SparsityMode::Irregular);
    }
  }
}

TEST(Projection, FullAlphaIsIdentityAndZeroAlphaClears) {
  std::mt19937_64 rng(25);
  const auto m = gaussian(4, 6, rng);
  for (auto mode : {SparsityMode::Irregular, SparsityMode::Filter, SparsityMode::Column, SparsityMode::Combined}) {
    EXPECT_EQ(sp::project(m, SparsityConstraint::identity(mode, 4, 6)).weights, m);
    EXPECT_TRUE(sp::project(m, SparsityConstraint{mode, 0, 0, 0}).weights.isZero(0));
  }
}

TEST(ProjectCombined, ColumnNormsOnlySeeSurvivingFilters) {
  // Column 0 would win on the full matrix, but most of its mass sits in a
  // row the filter step drops.
  sp::MatrixXd m(3, 3);
  m << 3.9, 0, 0,
       0,   3, 4,
       1,   0, 4;
  const auto p = sp::project_combined(m, SparsityConstraint::combined(2, 2));
  sp::MatrixXd want(3, 3);
  want << 0, 0, 0,
          0, 3, 4,
          0, 0, 4;
  EXPECT_EQ(p.weights, want);
  EXPECT_EQ(p.mask.mode, SparsityMode::Combined);
  EXPECT_EQ(sp::retained_rows(p.mask), (std::vector<Index>{1, 2}));
  EXPECT_EQ(sp::retained_cols(p.mask), (std::vector<Index>{1, 2}));
}

TEST(ProjectCombined, EqualsFilterThenColumnOnMaskedMatrix) {
  std::mt19937_64 rng(26);
  for (int rep = 0; rep < 40; ++rep) {
    const auto m = gaussian(5, 7, rng);
    const auto f = sp::project_filters(m, 3);
    const auto c = sp::project_columns(f.weights, 4);
    EXPECT_EQ(sp::project_combined(m, SparsityConstraint::combined(3, 4)).weights, c.weights);
  }
}

TEST(ProjectColumnsWithin, RejectsMaskLength) {
  EXPECT_THROW(sp::project_columns_within(sp::MatrixXf::Zero(3, 3), {1, 0}, 1), sp::ShapeMismatch);
}

TEST(Mask, StructureChecker) {
  auto outer = sp::SparsityMask::outer(SparsityMode::Combined, {1, 0, 1}, {0, 1, 1, 0});
  EXPECT_TRUE(sp::mask_is_structured(outer));
  outer.bits(0, 0) = 1;
  EXPECT_FALSE(sp::mask_is_structured(outer));

  EXPECT_TRUE(sp::mask_is_structured(sp::SparsityMask::outer(SparsityMode::Filter, {1, 0}, {1, 1, 1})));
  EXPECT_FALSE(sp::mask_is_structured(sp::SparsityMask::outer(SparsityMode::Filter, {1, 0}, {1, 0, 1})));
  EXPECT_TRUE(sp::mask_is_structured(sp::SparsityMask::outer(SparsityMode::Column, {1, 1}, {1, 0, 1})));
  EXPECT_FALSE(sp::mask_is_structured(sp::SparsityMask::outer(SparsityMode::Column, {0, 1}, {1, 0, 1})));
  EXPECT_FALSE(sp::mask_is_structured(sp::SparsityMask::ones(SparsityMode::Irregular, 2, 2)));
  EXPECT_TRUE(sp::mask_is_structured(sp::SparsityMask::ones(SparsityMode::Filter, 2, 2)));
}

TEST(Mask, ApplyRejectsShape) {
  EXPECT_THROW(sp::apply_mask(sp::MatrixXf::Zero(2, 2), sp::SparsityMask::ones(SparsityMode::Filter, 2, 3)),
               sp::ShapeMismatch);
}

TEST(Feasibility, CountsNonzeroGroups) {
  sp::MatrixXf m = sp::MatrixXf::Zero(3, 4);
  m(0, 1) = 1;
  m(2, 3) = -2;
  EXPECT_TRUE(sp::is_feasible(m, SparsityConstraint::filters(2)));
  EXPECT_FALSE(sp::is_feasible(m, SparsityConstraint::filters(1)));
  EXPECT_TRUE(sp::is_feasible(m, SparsityConstraint::columns(2)));
  EXPECT_FALSE(sp::is_feasible(m, SparsityConstraint::columns(1)));
  EXPECT_TRUE(sp::is_feasible(m, SparsityConstraint::irregular(2)));
  EXPECT_FALSE(sp::is_feasible(m, SparsityConstraint::combined(2, 1)));
}
