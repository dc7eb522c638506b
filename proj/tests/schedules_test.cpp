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

#include <cmath>
#include <random>

#include "structprune/errors.hpp"
#include "structprune/schedules.hpp"

namespace sp = structprune;

TEST(LrSchedule, AnalyticPoints) {
  const sp::LrSchedule s{0.1, 100, 1100, 0.0};
  EXPECT_EQ(sp::lr_at(0, s), 0.0);
  EXPECT_FLOAT_EQ(sp::lr_at(100, s), 0.1);
  EXPECT_FLOAT_EQ(sp::lr_at(600, s), 0.05);
  EXPECT_NEAR(sp::lr_at(1100, s), 0.0, 1e-12);
}

TEST(LrSchedule, WarmupIsLinear) {
  const sp::LrSchedule s{0.4, 8, 40, 0.0};
  for (int t = 0; t <= 8; ++t) EXPECT_DOUBLE_EQ(sp::lr_at(t, s), 0.4 * t / 8.0);
}

TEST(LrSchedule, DecayMatchesCosineAndIsMonotone) {
  const sp::LrSchedule s{0.2, 10, 110, 0.01};
  double prev = sp::lr_at(10, s);
  for (int t = 11; t <= 110; ++t) {
    const double lr = sp::lr_at(t, s);
    const double want = 0.01 + 0.5 * (1 + std::cos((t - 10) * M_PI / 100.0)) * (0.2 - 0.01);
    EXPECT_NEAR(lr, want, 1e-15);
    EXPECT_LE(lr, prev);
    EXPECT_GE(lr, 0.01 - 1e-15);
    prev = lr;
  }
}

TEST(LrSchedule, NoWarmupStartsAtPeak) {
  const sp::LrSchedule s{0.3, 0, 10, 0.0};
  EXPECT_DOUBLE_EQ(sp::lr_at(0, s), 0.3);
}

TEST(LrSchedule, RejectsBadArguments) {
  EXPECT_THROW(sp::lr_at(-1, {0.1, 1, 10, 0}), sp::InvalidArgument);
  EXPECT_THROW(sp::lr_at(11, {0.1, 1, 10, 0}), sp::InvalidArgument);
  EXPECT_THROW(sp::lr_at(0, {0.0, 1, 10, 0}), sp::InvalidArgument);
  EXPECT_THROW(sp::lr_at(0, {0.1, 11, 10, 0}), sp::InvalidArgument);
  EXPECT_THROW(sp::lr_at(0, {0.1, 1, 10, 0.2}), sp::InvalidArgument);
}

TEST(Mixup, EndpointIdentitiesAreExact) {
  const std::vector<float> a{1.5f, -2.25f, 3.1f, 1e-7f}, b{0.3f, 7.0f, -1.0f, 2.0f};
  EXPECT_EQ(sp::mix(a, b, 1.0), a);
  EXPECT_EQ(sp::mix(a, b, 0.0), b);
  const auto ex = sp::mixup(a, std::vector<float>{1, 0}, b, std::vector<float>{0, 1}, 1.0);
  EXPECT_EQ(ex.x, a);
  EXPECT_EQ(ex.y, (std::vector<float>{1, 0}));
}

TEST(Mixup, IsConvexCombination) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n;
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    std::vector<float> a(16), b(16);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng);
    const double lam = u(rng);
    const auto m = sp::mix(a, b, lam);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(m[i], lam * a[i] + (1 - lam) * b[i], 1e-6);
  }
}

TEST(Mixup, SoftLabelsSumToOne) {
  const auto ex = sp::mixup(std::vector<float>{0}, std::vector<float>{0, 1, 0}, std::vector<float>{0},
                            std::vector<float>{1, 0, 0}, 0.3);
  EXPECT_NEAR(ex.y[0] + ex.y[1] + ex.y[2], 1.0, 1e-7);
  EXPECT_NEAR(ex.y[1], 0.3, 1e-7);
}

TEST(Mixup, RejectsBadArguments) {
  const std::vector<float> a{1, 2}, b{1};
  EXPECT_THROW(sp::mix(a, b, 0.5), sp::ShapeMismatch);
  EXPECT_THROW(sp::mix(a, a, 1.5), sp::InvalidArgument);
  EXPECT_THROW(sp::mix(a, a, -0.5), sp::InvalidArgument);
  std::mt19937_64 rng(1);
  EXPECT_THROW(sp::sample_lambda({0.0, true}, rng), sp::InvalidArgument);
}

TEST(BetaSampler, MomentsOfBetaPointTwo) {
  std::mt19937_64 rng(2024);
  const sp::MixupConfig c{0.2, true};
  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double l = sp::sample_lambda(c, rng);
    ASSERT_GE(l, 0.0);
    ASSERT_LE(l, 1.0);
    sum += l;
    sq += l * l;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  // Beta(a, a): mean 1/2, variance 1 / (4 (2a + 1)).
  EXPECT_NEAR(mean, 0.5, 0.01);
  EXPECT_NEAR(var, 1.0 / (4.0 * 1.4), 0.01);
}

TEST(BetaSampler, DeterministicUnderSeed) {
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sp::sample_lambda({0.2, true}, a), sp::sample_lambda({0.2, true}, b));
}
