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
#include <map>
#include <random>
#include <variant>
#include <vector>

#include "structprune/manifest.hpp"
#include "structprune/sparsity.hpp"
#include "structprune/tensor.hpp"

namespace structprune {

/// Batch of feature maps stored as channels x (batch * height * width); the
/// column index of pixel (b, y, x) is (b * height + y) * width + x.
template <typename Scalar>
struct FeatureMap {
  Index batch = 0;
  Index channels = 0;
  Index height = 0;
  Index width = 0;
  GemmMatrix<Scalar> data;

  static FeatureMap zeros(Index b, Index c, Index h, Index w) {
    return {b, c, h, w, GemmMatrix<Scalar>::Zero(c, b * h * w)};
  }
  Index pixels() const { return height * width; }
  Scalar& at(Index b, Index c, Index y, Index x) { return data(c, (b * height + y) * width + x); }
  Scalar at(Index b, Index c, Index y, Index x) const { return data(c, (b * height + y) * width + x); }

  template <typename Other>
  FeatureMap<Other> cast() const {
    return {batch, channels, height, width, data.template cast<Other>()};
  }
};

inline constexpr double kLeakySlope = 0.1;

namespace detail {

struct ConvGeometry {
  Index channels, kernel_h, kernel_w, stride, pad;
  Index in_h, in_w, out_h, out_w;
};

inline ConvGeometry geometry(const LayerDescriptor& l, Index in_h, Index in_w) {
  return {l.C, l.KH, l.KW, l.stride, l.pad, in_h, in_w, (in_h + 2 * l.pad - l.KH) / l.stride + 1,
          (in_w + 2 * l.pad - l.KW) / l.stride + 1};
}

/// Lowers the input to a (C*KH*KW) x (B*OH*OW) matrix. When `rows` is given
/// only those receptive-field rows are materialised, in that order.
template <typename Scalar>
GemmMatrix<Scalar> im2col(const FeatureMap<Scalar>& in, const ConvGeometry& g, const std::vector<Index>* rows = nullptr) {
  const Index kk = g.kernel_h * g.kernel_w;
  const Index n_rows = rows ? static_cast<Index>(rows->size()) : g.channels * kk;
  const Index out_px = g.out_h * g.out_w;
  GemmMatrix<Scalar> cols = GemmMatrix<Scalar>::Zero(n_rows, in.batch * out_px);
  for (Index r = 0; r < n_rows; ++r) {
    const Index src = rows ? (*rows)[r] : r;
    const Index c = src / kk, i = (src % kk) / g.kernel_w, j = src % g.kernel_w;
    for (Index b = 0; b < in.batch; ++b)
      for (Index oy = 0; oy < g.out_h; ++oy) {
        const Index iy = oy * g.stride - g.pad + i;
        if (iy < 0 || iy >= g.in_h) continue;
        const Scalar* src_row = in.data.row(c).data() + (b * g.in_h + iy) * g.in_w;
        Scalar* dst = cols.row(r).data() + b * out_px + oy * g.out_w;
        for (Index ox = 0; ox < g.out_w; ++ox) {
          const Index ix = ox * g.stride - g.pad + j;
          if (ix >= 0 && ix < g.in_w) dst[ox] = src_row[ix];
        }
      }
  }
  return cols;
}

/// Adjoint of im2col: scatters column gradients back onto the input map.
template <typename Scalar>
FeatureMap<Scalar> col2im(const GemmMatrix<Scalar>& cols, Index batch, const ConvGeometry& g) {
  auto out = FeatureMap<Scalar>::zeros(batch, g.channels, g.in_h, g.in_w);
  const Index kk = g.kernel_h * g.kernel_w;
  const Index out_px = g.out_h * g.out_w;
  for (Index r = 0; r < cols.rows(); ++r) {
    const Index c = r / kk, i = (r % kk) / g.kernel_w, j = r % g.kernel_w;
    for (Index b = 0; b < batch; ++b)
      for (Index oy = 0; oy < g.out_h; ++oy) {
        const Index iy = oy * g.stride - g.pad + i;
        if (iy < 0 || iy >= g.in_h) continue;
        Scalar* dst_row = out.data.row(c).data() + (b * g.in_h + iy) * g.in_w;
        const Scalar* src = cols.row(r).data() + b * out_px + oy * g.out_w;
        for (Index ox = 0; ox < g.out_w; ++ox) {
          const Index ix = ox * g.stride - g.pad + j;
          if (ix >= 0 && ix < g.in_w) dst_row[ix] += src[ox];
        }
      }
  }
  return out;
}

template <typename Scalar>
void activate(GemmMatrix<Scalar>& m, Activation act) {
  switch (act) {
    case Activation::Linear: return;
    case Activation::Relu: m = m.cwiseMax(Scalar(0)); return;
    case Activation::Leaky:
      m = m.unaryExpr([](Scalar v) { return v > Scalar(0) ? v : Scalar(kLeakySlope) * v; });
      return;
  }
}

/// Multiplies `grad` by the activation derivative evaluated at `pre`.
template <typename Scalar>
void activation_backward(GemmMatrix<Scalar>& grad, const GemmMatrix<Scalar>& pre, Activation act) {
  switch (act) {
    case Activation::Linear: return;
    case Activation::Relu:
      grad = grad.cwiseProduct(pre.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); }));
      return;
    case Activation::Leaky:
      grad = grad.cwiseProduct(pre.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(kLeakySlope); }));
      return;
  }
}

}  // namespace detail

template <typename Scalar>
struct ConvLayer {
  LayerDescriptor desc;
  GemmMatrix<Scalar> weight;  // F x C*KH*KW
  Vector<Scalar> bias;
  GemmMatrix<Scalar> grad_weight;
  Vector<Scalar> grad_bias;
};

/// Global average pooling over the spatial dims.
struct PoolLayer {};

/// Input and detect markers carry no computation.
struct PassLayer {};

template <typename Scalar>
using NetLayer = std::variant<ConvLayer<Scalar>, PoolLayer, PassLayer>;

/// What backward needs from the forward pass of one layer.
template <typename Scalar>
struct ForwardCache {
  GemmMatrix<Scalar> cols;
  GemmMatrix<Scalar> pre;
  detail::ConvGeometry geom{};
  Index batch = 0;
  Index in_h = 0;
  Index in_w = 0;
};

/// Sequential network instantiated from a manifest (input, conv, pool and
/// detect kinds only; shortcut, route and upsample exist for accounting).
template <typename Scalar>
class Network {
 public:
  Network() = default;

  explicit Network(LayerManifest manifest) : manifest_(std::move(manifest)) {
    validate(manifest_);
    for (std::size_t i = 0; i < manifest_.layers.size(); ++i) {
      const auto& l = manifest_.layers[i];
      if (!l.from.empty())
        throw InvalidArgument("layer " + std::to_string(i) + ": non-sequential inputs cannot be instantiated");
      switch (l.kind) {
        case LayerKind::Conv: {
          ConvLayer<Scalar> c;
          c.desc = l;
          c.weight = GemmMatrix<Scalar>::Zero(l.F, l.C * l.KH * l.KW);
          c.bias = Vector<Scalar>::Zero(l.F);
          c.grad_weight = GemmMatrix<Scalar>::Zero(l.F, l.C * l.KH * l.KW);
          c.grad_bias = Vector<Scalar>::Zero(l.F);
          layers_.emplace_back(std::move(c));
          break;
        }
        case LayerKind::Pool: layers_.emplace_back(PoolLayer{}); break;
        case LayerKind::Input:
        case LayerKind::Detect: layers_.emplace_back(PassLayer{}); break;
        default:
          throw InvalidArgument("layer " + std::to_string(i) + " (" + to_string(l.kind) +
                                "): kind is supported for accounting only");
      }
    }
  }

  const LayerManifest& manifest() const { return manifest_; }
  std::size_t size() const { return layers_.size(); }

  Index input_channels() const {
    const auto& first = manifest_.layers.front();
    return first.kind == LayerKind::Input ? first.F : first.C;
  }

  std::vector<Index> prunable_layers() const { return manifest_.prunable_layers(); }
  std::vector<Index> conv_layers() const { return manifest_.conv_layers(); }

  ConvLayer<Scalar>& conv(Index i) { return std::get<ConvLayer<Scalar>>(layers_.at(i)); }
  const ConvLayer<Scalar>& conv(Index i) const { return std::get<ConvLayer<Scalar>>(layers_.at(i)); }

  /// He-normal weights scaled by fan-in, zero biases. A conv feeding a
  /// detect layer starts its objectness and class logits at a 1% prior so
  /// the many empty cells do not dominate the first updates.
  void init_weights(std::mt19937_64& rng) {
    for (Index i : conv_layers()) {
      auto& c = conv(i);
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(c.weight.cols())));
      for (Index k = 0; k < c.weight.size(); ++k) c.weight.data()[k] = static_cast<Scalar>(dist(rng));
      c.bias.setZero();
      const auto next = static_cast<std::size_t>(i) + 1;
      if (next < manifest_.layers.size() && manifest_.layers[next].kind == LayerKind::Detect)
        for (Index ch = 4; ch + 1 < c.bias.size(); ch += kDetectChannels / kAnchorsPerScale) {
          c.bias[ch] = static_cast<Scalar>(-std::log(99.0));
          c.bias[ch + 1] = static_cast<Scalar>(-std::log(99.0));
        }
    }
  }

  /// Forward pass that records what backward needs.
  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    caches_.assign(layers_.size(), ForwardCache<Scalar>{});
    return run(x, &caches_);
  }

  /// Forward pass without caches; safe on a shared const network.
  FeatureMap<Scalar> infer(const FeatureMap<Scalar>& x) const { return run(x, nullptr); }

  /// Back-propagates `grad_out` (d loss / d output) and overwrites all
  /// parameter gradients. Must follow forward() on the same batch.
  void backward(const FeatureMap<Scalar>& grad_out) {
    if (caches_.size() != layers_.size()) throw InvalidArgument("backward called without a preceding forward");
    FeatureMap<Scalar> g = grad_out;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& cache = caches_[k];
      if (auto* c = std::get_if<ConvLayer<Scalar>>(&layers_[k])) {
        GemmMatrix<Scalar> dpre = g.data;
        detail::activation_backward(dpre, cache.pre, c->desc.activation);
        c->grad_weight.noalias() = dpre * cache.cols.transpose();
        c->grad_bias = dpre.rowwise().sum();
        GemmMatrix<Scalar> dcols = c->weight.transpose() * dpre;
        g = detail::col2im(dcols, cache.batch, cache.geom);
      } else if (std::holds_alternative<PoolLayer>(layers_[k])) {
        const Index px = cache.in_h * cache.in_w;
        auto in_grad = FeatureMap<Scalar>::zeros(g.batch, g.channels, cache.in_h, cache.in_w);
        for (Index b = 0; b < g.batch; ++b)
          in_grad.data.middleCols(b * px, px) = (g.data.col(b) / Scalar(px)).replicate(1, px);
        g = std::move(in_grad);
      }
    }
    input_grad_ = std::move(g);
  }

  /// d loss / d input from the last backward pass.
  const FeatureMap<Scalar>& input_grad() const { return input_grad_; }

  void zero_grad() {
    for (Index i : conv_layers()) {
      conv(i).grad_weight.setZero();
      conv(i).grad_bias.setZero();
    }
  }

  template <typename Other>
  Network<Other> cast() const {
    Network<Other> out(manifest_);
    for (Index i : conv_layers()) {
      out.conv(i).weight = conv(i).weight.template cast<Other>();
      out.conv(i).bias = conv(i).bias.template cast<Other>();
    }
    return out;
  }

 private:
  FeatureMap<Scalar> run(const FeatureMap<Scalar>& x, std::vector<ForwardCache<Scalar>>* caches) const {
    if (x.channels != input_channels())
      throw ShapeMismatch("network expects " + std::to_string(input_channels()) + " input channels, got " +
                          std::to_string(x.channels));
    FeatureMap<Scalar> h = x;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      if (const auto* c = std::get_if<ConvLayer<Scalar>>(&layers_[k])) {
        const auto g = detail::geometry(c->desc, h.height, h.width);
        if (g.out_h < 1 || g.out_w < 1) throw ShapeMismatch("input too small for layer " + std::to_string(k));
        GemmMatrix<Scalar> cols = detail::im2col(h, g);
        GemmMatrix<Scalar> pre = c->weight * cols;
        pre.colwise() += c->bias;
        FeatureMap<Scalar> out{h.batch, c->desc.F, g.out_h, g.out_w, pre};
        detail::activate(out.data, c->desc.activation);
        if (caches) {
          auto& cache = (*caches)[k];
          cache.cols = std::move(cols);
          cache.pre = std::move(pre);
          cache.geom = g;
          cache.batch = h.batch;
        }
        h = std::move(out);
      } else if (std::holds_alternative<PoolLayer>(layers_[k])) {
        const Index px = h.pixels();
        FeatureMap<Scalar> out = FeatureMap<Scalar>::zeros(h.batch, h.channels, 1, 1);
        for (Index b = 0; b < h.batch; ++b) out.data.col(b) = h.data.middleCols(b * px, px).rowwise().mean();
        if (caches) {
          (*caches)[k].in_h = h.height;
          (*caches)[k].in_w = h.width;
        }
        h = std::move(out);
      }
    }
    return h;
  }

  LayerManifest manifest_;
  std::vector<NetLayer<Scalar>> layers_;
  std::vector<ForwardCache<Scalar>> caches_;
  FeatureMap<Scalar> input_grad_;
};

/// Conv layer whose GEMM runs on the compacted weight block: only retained
/// receptive-field rows are lowered and only retained filters are computed.
/// Dropped filters output their bias.
template <typename Scalar>
struct CompactConv {
  LayerDescriptor desc;
  CompactedMatrix<Scalar> weight;
  Vector<Scalar> bias;
};

template <typename Scalar>
class CompactNetwork {
 public:
  /// Compacts every conv layer. Layers with a mask use the mask's retained
  /// rows/columns; compaction fails if the weights have nonzeros outside them.
  CompactNetwork(const Network<Scalar>& net, const std::map<Index, SparsityMask>& masks) : manifest_(net.manifest()) {
    for (std::size_t i = 0; i < manifest_.layers.size(); ++i) {
      const auto& l = manifest_.layers[i];
      if (l.kind == LayerKind::Conv) {
        const auto& c = net.conv(static_cast<Index>(i));
        std::vector<Index> rows, cols;
        if (auto it = masks.find(static_cast<Index>(i)); it != masks.end()) {
          if (!mask_is_structured(it->second))
            throw InvalidArgument("layer " + std::to_string(i) + ": irregular masks cannot be compacted");
          rows = retained_rows(it->second);
          cols = retained_cols(it->second);
        } else {
          for (Index r = 0; r < c.weight.rows(); ++r) rows.push_back(r);
          for (Index k = 0; k < c.weight.cols(); ++k) cols.push_back(k);
        }
        convs_.emplace(static_cast<Index>(i), CompactConv<Scalar>{l, compact(c.weight, rows, cols), c.bias});
      }
    }
  }

  const CompactConv<Scalar>& layer(Index i) const { return convs_.at(i); }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) const {
    FeatureMap<Scalar> h = x;
    for (std::size_t k = 0; k < manifest_.layers.size(); ++k) {
      const auto& l = manifest_.layers[k];
      if (l.kind == LayerKind::Conv) {
        const auto& c = convs_.at(static_cast<Index>(k));
        const auto g = detail::geometry(l, h.height, h.width);
        const GemmMatrix<Scalar> cols = detail::im2col(h, g, &c.weight.col_index);
        const GemmMatrix<Scalar> partial = c.weight.dense * cols;
        FeatureMap<Scalar> out{h.batch, l.F, g.out_h, g.out_w, c.bias.replicate(1, cols.cols())};
        for (std::size_t r = 0; r < c.weight.row_index.size(); ++r) out.data.row(c.weight.row_index[r]) += partial.row(r);
        detail::activate(out.data, l.activation);
        h = std::move(out);
      } else if (l.kind == LayerKind::Pool) {
        const Index px = h.pixels();
        FeatureMap<Scalar> out = FeatureMap<Scalar>::zeros(h.batch, h.channels, 1, 1);
        for (Index b = 0; b < h.batch; ++b) out.data.col(b) = h.data.middleCols(b * px, px).rowwise().mean();
        h = std::move(out);
      }
    }
    return h;
  }

 private:
  LayerManifest manifest_;
  std::map<Index, CompactConv<Scalar>> convs_;
};

}  // namespace structprune
