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

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace structprune {

/// Linear warmup from 0 to lr0 over `warmup_batches`, then cosine decay to
/// `lr_min` (0 by default) over the remaining batches.
struct LrSchedule {
  double lr0 = 1e-3;
  std::int64_t warmup_batches = 0;
  std::int64_t total_batches = 1;
  double lr_min = 0.0;

  void validate() const;
};

/// Learning rate for batch `t` in [0, total_batches]; t == total_batches is
/// the end-of-training value (lr_min).
double lr_at(std::int64_t t, const LrSchedule& s);

struct MixupConfig {
  double alpha = 0.2;
  bool enabled = false;
};

/// Draws lambda ~ Beta(alpha, alpha) as X / (X + Y) with X, Y ~ Gamma(alpha, 1).
double sample_lambda(const MixupConfig& c, std::mt19937_64& rng);

/// x' = lambda * a + (1 - lambda) * b, elementwise.
std::vector<float> mix(std::span<const float> a, std::span<const float> b, double lambda);

struct MixedExample {
  std::vector<float> x;
  std::vector<float> y;
};

MixedExample mixup(std::span<const float> x_i, std::span<const float> y_i, std::span<const float> x_j,
                   std::span<const float> y_j, double lambda);

}  // namespace structprune
