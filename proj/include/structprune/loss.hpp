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

#include "structprune/network.hpp"

namespace structprune {

template <typename Scalar>
struct LossGrad {
  double loss = 0;
  FeatureMap<Scalar> grad;
};

/// Mean softmax cross-entropy over the batch against soft targets
/// (classes x batch, columns summing to 1). `logits` is classes x batch.
template <typename Scalar>
LossGrad<Scalar> softmax_cross_entropy(const FeatureMap<Scalar>& logits, const GemmMatrix<Scalar>& targets) {
  if (logits.data.rows() != targets.rows() || logits.data.cols() != targets.cols())
    throw ShapeMismatch("cross-entropy targets do not match logits");
  const Index batch = logits.data.cols();
  LossGrad<Scalar> out{0.0, logits};
  for (Index b = 0; b < batch; ++b) {
    const auto z = logits.data.col(b).template cast<double>();
    const double m = z.maxCoeff();
    const Eigen::VectorXd e = (z.array() - m).exp();
    const double sum = e.sum();
    const Eigen::VectorXd logp = (z.array() - m - std::log(sum)).matrix();
    const Eigen::VectorXd t = targets.col(b).template cast<double>();
    out.loss -= t.dot(logp);
    out.grad.data.col(b) = ((e / sum - t) / static_cast<double>(batch)).template cast<Scalar>();
  }
  out.loss /= static_cast<double>(batch);
  return out;
}

template <typename Scalar>
GemmMatrix<Scalar> one_hot(const std::vector<int>& labels, Index classes) {
  GemmMatrix<Scalar> t = GemmMatrix<Scalar>::Zero(classes, static_cast<Index>(labels.size()));
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] < 0 || labels[b] >= classes) throw InvalidArgument("label out of range");
    t(labels[b], static_cast<Index>(b)) = Scalar(1);
  }
  return t;
}

}  // namespace structprune
