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

#include "structprune/schedules.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "structprune/errors.hpp"

namespace structprune {

void LrSchedule::validate() const {
  if (!(lr0 > 0)) throw InvalidArgument("lr0 must be positive");
  if (warmup_batches < 0) throw InvalidArgument("warmup_batches must be non-negative");
  if (total_batches < 1 || total_batches < warmup_batches)
    throw InvalidArgument("total_batches must be >= max(1, warmup_batches)");
  if (lr_min < 0 || lr_min > lr0) throw InvalidArgument("lr_min must lie in [0, lr0]");
}

double lr_at(std::int64_t t, const LrSchedule& s) {
  s.validate();
  if (t < 0 || t > s.total_batches)
    throw InvalidArgument("batch index " + std::to_string(t) + " outside [0, " + std::to_string(s.total_batches) +
                          "]");
  if (t < s.warmup_batches) return s.lr0 * static_cast<double>(t) / static_cast<double>(s.warmup_batches);
  const double t_decay = static_cast<double>(t - s.warmup_batches);
  const double span = static_cast<double>(s.total_batches - s.warmup_batches);
  const double cosine = 0.5 * (1.0 + std::cos(t_decay * std::numbers::pi / span));
  return s.lr_min + cosine * (s.lr0 - s.lr_min);
}

double sample_lambda(const MixupConfig& c, std::mt19937_64& rng) {
  if (!(c.alpha > 0)) throw InvalidArgument("mixup alpha must be positive");
  std::gamma_distribution<double> gamma(c.alpha, 1.0);
  // Small alpha can underflow both draws to 0; redraw in that case.
  for (;;) {
    const double x = gamma(rng);
    const double y = gamma(rng);
    if (x + y > 0) return x / (x + y);
  }
}

std::vector<float> mix(std::span<const float> a, std::span<const float> b, double lambda) {
  if (a.size() != b.size()) throw ShapeMismatch("mixup operands differ in length");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("mixup lambda outside [0, 1]");
  std::vector<float> out(a.size());
  const double mu = 1.0 - lambda;
  for (std::size_t i = 0; i < a.size(); ++i)
    out[i] = static_cast<float>(lambda * static_cast<double>(a[i]) + mu * static_cast<double>(b[i]));
  return out;
}

MixedExample mixup(std::span<const float> x_i, std::span<const float> y_i, std::span<const float> x_j,
                   std::span<const float> y_j, double lambda) {
  return {mix(x_i, x_j, lambda), mix(y_i, y_j, lambda)};
}

}  // namespace structprune
