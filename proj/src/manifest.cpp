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

#include "structprune/manifest.hpp"

#include <fstream>
#include <map>

namespace structprune {

namespace {

const std::map<std::string, LayerKind> kKindNames = {
    {"input", LayerKind::Input},       {"conv", LayerKind::Conv},         {"pool", LayerKind::Pool},
    {"upsample", LayerKind::Upsample}, {"shortcut", LayerKind::Shortcut}, {"route", LayerKind::Route},
    {"detect", LayerKind::Detect}};

const std::map<std::string, Activation> kActivationNames = {
    {"linear", Activation::Linear}, {"relu", Activation::Relu}, {"leaky", Activation::Leaky}};

struct FeatureShape {
  Index channels = 0;
  Index height = 0;  // 0 = unknown
  Index width = 0;
};

[[noreturn]] void inconsistent(std::size_t i, const LayerDescriptor& l, const std::string& what) {
  throw ManifestInconsistency("layer " + std::to_string(i) + " (" + to_string(l.kind) + "): " + what);
}

Index get_count(const nlohmann::json& j, const char* key, Index fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw ParseError(std::string("field '") + key + "' must be an integer");
  return j.at(key).get<Index>();
}

}  // namespace

std::string to_string(LayerKind kind) {
  for (const auto& [name, k] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::string to_string(Activation act) {
  for (const auto& [name, a] : kActivationNames)
    if (a == act) return name;
  return "unknown";
}

std::vector<Index> LayerManifest::conv_layers() const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].kind == LayerKind::Conv) out.push_back(static_cast<Index>(i));
  return out;
}

std::vector<Index> LayerManifest::prunable_layers() const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].kind == LayerKind::Conv && layers[i].prunable) out.push_back(static_cast<Index>(i));
  return out;
}

void validate(const LayerManifest& manifest) {
  if (manifest.layers.empty()) throw ManifestInconsistency("manifest has no layers");
  std::vector<FeatureShape> out(manifest.layers.size());

  for (std::size_t i = 0; i < manifest.layers.size(); ++i) {
    const auto& l = manifest.layers[i];
    for (Index src : l.from)
      if (src < 0 || src >= static_cast<Index>(i)) inconsistent(i, l, "source layer " + std::to_string(src) + " is not an earlier layer");

    FeatureShape in{};
    bool have_input = false;
    if (!l.from.empty()) {
      in = out[l.from.front()];
      have_input = true;
    } else if (i > 0) {
      in = out[i - 1];
      have_input = true;
    }

    if (l.H_out < 0 || l.W_out < 0) inconsistent(i, l, "negative spatial size");
    const auto check_spatial = [&](Index h, Index w) {
      if (in.height > 0 && l.H_out > 0 && (l.H_out != h || l.W_out != w))
        inconsistent(i, l, "output " + std::to_string(l.H_out) + "x" + std::to_string(l.W_out) + " but expected " +
                               std::to_string(h) + "x" + std::to_string(w));
    };
    const auto check_passthrough_channels = [&]() {
      if (have_input && (l.F != in.channels || l.C != in.channels))
        inconsistent(i, l, "F/C must equal input channels " + std::to_string(in.channels));
    };

    switch (l.kind) {
      case LayerKind::Input:
        if (i != 0) inconsistent(i, l, "input descriptor must come first");
        if (l.F < 1 || l.H_out < 1 || l.W_out < 1) inconsistent(i, l, "input needs F, H_out, W_out >= 1");
        out[i] = {l.F, l.H_out, l.W_out};
        continue;
      case LayerKind::Conv: {
        if (!l.weight_shape().valid() || l.stride < 1 || l.pad < 0)
          inconsistent(i, l, "conv needs F, C, KH, KW, stride >= 1 and pad >= 0");
        if (have_input && l.C != in.channels)
          inconsistent(i, l, "C=" + std::to_string(l.C) + " does not match input channels " + std::to_string(in.channels));
        if (in.height > 0) {
          const Index h = (in.height + 2 * l.pad - l.KH) / l.stride + 1;
          const Index w = (in.width + 2 * l.pad - l.KW) / l.stride + 1;
          if (l.H_out == 0 || l.W_out == 0) inconsistent(i, l, "missing spatial dims");
          check_spatial(h, w);
        }
        break;
      }
      case LayerKind::Pool:
        check_passthrough_channels();
        if (l.H_out != 1 || l.W_out != 1) inconsistent(i, l, "global pooling produces a 1x1 map");
        break;
      case LayerKind::Upsample:
        check_passthrough_channels();
        if (l.stride < 1) inconsistent(i, l, "stride must be >= 1");
        check_spatial(in.height * l.stride, in.width * l.stride);
        break;
      case LayerKind::Shortcut: {
        if (l.from.size() != 1) inconsistent(i, l, "shortcut needs exactly one source in 'from'");
        const auto& prev = out[i - 1];
        const auto& src = out[l.from.front()];
        if (prev.channels != src.channels) inconsistent(i, l, "shortcut operands differ in channels");
        if (l.F != prev.channels) inconsistent(i, l, "F must equal operand channels");
        in = prev;
        check_spatial(src.height, src.width);
        break;
      }
      case LayerKind::Route: {
        if (l.from.empty()) inconsistent(i, l, "route needs at least one source in 'from'");
        Index channels = 0;
        for (Index src : l.from) {
          channels += out[src].channels;
          if (out[src].height != out[l.from.front()].height || out[src].width != out[l.from.front()].width)
            inconsistent(i, l, "route sources differ in spatial size");
        }
        if (l.F != channels) inconsistent(i, l, "F=" + std::to_string(l.F) + " but sources provide " + std::to_string(channels) + " channels");
        check_spatial(in.height, in.width);
        break;
      }
      case LayerKind::Detect:
        check_passthrough_channels();
        check_spatial(in.height, in.width);
        break;
    }
    out[i] = {l.F, l.H_out, l.W_out};
  }
}

LayerManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError("manifest must be a JSON array of layer descriptors");
  LayerManifest m;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    try {
      if (!e.is_object()) throw ParseError("descriptor is not an object");
      LayerDescriptor l;
      const auto kind = e.value("kind", std::string{});
      if (!kKindNames.count(kind)) throw ParseError("unknown kind '" + kind + "'");
      l.kind = kKindNames.at(kind);
      l.F = get_count(e, "F", 1);
      l.C = get_count(e, "C", l.F);
      l.KH = get_count(e, "KH", 1);
      l.KW = get_count(e, "KW", l.KH);
      l.stride = get_count(e, "stride", 1);
      l.pad = get_count(e, "pad", l.kind == LayerKind::Conv ? l.KH / 2 : 0);
      l.H_out = get_count(e, "H_out", 0);
      l.W_out = get_count(e, "W_out", l.H_out);
      l.prunable = e.value("prunable", false);
      const auto act = e.value("activation", std::string{"linear"});
      if (!kActivationNames.count(act)) throw ParseError("unknown activation '" + act + "'");
      l.activation = kActivationNames.at(act);
      if (e.contains("from")) l.from = e.at("from").get<std::vector<Index>>();
      m.layers.push_back(std::move(l));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError("layer " + std::to_string(i) + ": " + ex.what());
    } catch (const ParseError& ex) {
      throw ParseError("layer " + std::to_string(i) + ": " + ex.what());
    }
  }
  return m;
}

nlohmann::json manifest_to_json(const LayerManifest& manifest) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : manifest.layers) {
    nlohmann::json e;
    e["kind"] = to_string(l.kind);
    e["F"] = l.F;
    e["C"] = l.C;
    e["KH"] = l.KH;
    e["KW"] = l.KW;
    e["stride"] = l.stride;
    e["pad"] = l.pad;
    e["H_out"] = l.H_out;
    e["W_out"] = l.W_out;
    e["prunable"] = l.prunable;
    e["activation"] = to_string(l.activation);
    if (!l.from.empty()) e["from"] = l.from;
    arr.push_back(std::move(e));
  }
  return arr;
}

LayerManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("manifest " + path.string() + ": " + ex.what());
  }
  auto m = manifest_from_json(j);
  validate(m);
  return m;
}

namespace {

LayerDescriptor conv(Index f, Index c, Index k, Index stride, Index h_in, Activation act, bool prunable) {
  LayerDescriptor l;
  l.kind = LayerKind::Conv;
  l.F = f;
  l.C = c;
  l.KH = l.KW = k;
  l.stride = stride;
  l.pad = k / 2;
  l.H_out = l.W_out = (h_in + 2 * l.pad - k) / stride + 1;
  l.activation = act;
  l.prunable = prunable;
  return l;
}

LayerDescriptor input(Index channels, Index size) {
  LayerDescriptor l;
  l.kind = LayerKind::Input;
  l.F = l.C = channels;
  l.H_out = l.W_out = size;
  return l;
}

}  // namespace

LayerManifest tiny_classifier_manifest(Index image_size, Index in_channels, Index classes, Index width) {
  LayerManifest m;
  m.layers.push_back(input(in_channels, image_size));
  m.layers.push_back(conv(width, in_channels, 3, 1, image_size, Activation::Relu, true));
  m.layers.push_back(conv(2 * width, width, 3, 2, m.layers.back().H_out, Activation::Relu, true));
  m.layers.push_back(conv(2 * width, 2 * width, 3, 1, m.layers.back().H_out, Activation::Relu, true));
  LayerDescriptor pool;
  pool.kind = LayerKind::Pool;
  pool.F = pool.C = 2 * width;
  pool.H_out = pool.W_out = 1;
  m.layers.push_back(pool);
  m.layers.push_back(conv(classes, 2 * width, 1, 1, 1, Activation::Linear, false));
  validate(m);
  return m;
}

LayerManifest tiny_detect_manifest(Index image_size, Index in_channels, Index downsamples, Index width) {
  if (downsamples < 1) throw InvalidArgument("detector needs at least one downsampling layer");
  LayerManifest m;
  m.layers.push_back(input(in_channels, image_size));
  Index channels = in_channels;
  for (Index d = 0; d < downsamples; ++d) {
    const Index f = width << std::min<Index>(d, 2);
    m.layers.push_back(conv(f, channels, 3, 2, m.layers.back().H_out, Activation::Leaky, true));
    channels = f;
  }
  m.layers.push_back(conv(channels, channels, 3, 1, m.layers.back().H_out, Activation::Leaky, true));
  m.layers.push_back(conv(kDetectChannels, channels, 1, 1, m.layers.back().H_out, Activation::Linear, false));
  LayerDescriptor det;
  det.kind = LayerKind::Detect;
  det.F = det.C = kDetectChannels;
  det.H_out = det.W_out = m.layers.back().H_out;
  m.layers.push_back(det);
  validate(m);
  return m;
}

}  // namespace structprune
