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

#include "structprune/archive.hpp"

#include <fstream>
#include <sstream>

#include "structprune/dataset.hpp"

namespace structprune {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatTag = "structprune-archive";

std::uint64_t bias_count(const LayerManifest& m) {
  std::uint64_t n = 0;
  for (Index i : m.conv_layers()) n += static_cast<std::uint64_t>(m.layers[i].F);
  return n;
}

std::vector<float> read_sized_blob(const fs::path& path, std::uint64_t expected_floats) {
  const auto actual = fs::exists(path) ? fs::file_size(path) : 0;
  if (actual != expected_floats * 4)
    throw ArchiveError(path.filename().string() + ": expected " + std::to_string(expected_floats * 4) +
                       " bytes, found " + std::to_string(actual));
  return read_f32_blob(path);
}

std::string write_mask_bits(const LayerMasks& masks) {
  std::string out;
  for (const auto& [index, mask] : masks) {
    const Index n = mask.bits.size();
    std::string bytes(static_cast<std::size_t>((n + 7) / 8), '\0');
    for (Index k = 0; k < n; ++k)
      if (mask.bits.data()[k]) bytes[k / 8] = static_cast<char>(bytes[k / 8] | (1 << (k % 8)));
    out += bytes;
  }
  return out;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

bool ModelArchive::compaction_eligible() const {
  if (masks.empty()) return false;
  for (const auto& [index, mask] : masks)
    if (!mask_is_structured(mask)) return false;
  return true;
}

void save_archive(const fs::path& dir, const ModelArchive& archive) {
  if (archive.weights.size() != count_params(archive.manifest))
    throw ArchiveError("weights hold " + std::to_string(archive.weights.size()) + " values, manifest implies " +
                       std::to_string(count_params(archive.manifest)));
  if (archive.biases.size() != bias_count(archive.manifest)) throw ArchiveError("bias count does not match manifest");
  check_masks(archive.manifest, archive.masks);

  nlohmann::json doc;
  doc["format"] = kFormatTag;
  doc["version"] = kArchiveVersion;
  doc["manifest"] = manifest_to_json(archive.manifest);
  doc["meta"] = archive.meta;
  doc["masks"] = nlohmann::json::array();
  for (const auto& [index, mask] : archive.masks)
    doc["masks"].push_back({{"layer", index}, {"mode", to_string(mask.mode)}, {"rows", mask.rows()}, {"cols", mask.cols()}});
  doc["compaction_eligible"] = archive.compaction_eligible();

  fs::path target = dir;
  if (target.filename().empty()) target = target.parent_path();
  const fs::path tmp = target.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write_file(tmp / "model.json", doc.dump(2) + "\n");
  write_f32_blob(tmp / "weights.bin", archive.weights);
  write_f32_blob(tmp / "biases.bin", archive.biases);
  if (!archive.masks.empty()) write_file(tmp / "masks.bin", write_mask_bits(archive.masks));
  fs::remove_all(target);
  fs::rename(tmp, target);
}

ModelArchive load_archive(const fs::path& dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(dir / "model.json"));
  } catch (const nlohmann::json::exception& ex) {
    throw ArchiveError("model.json: " + std::string(ex.what()));
  }
  if (doc.value("format", std::string{}) != kFormatTag) throw ArchiveError("not a structprune archive: " + dir.string());
  const int version = doc.value("version", -1);
  if (version != kArchiveVersion)
    throw ArchiveError("archive version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kArchiveVersion) + ")");

  ModelArchive a;
  a.manifest = manifest_from_json(doc.at("manifest"));
  validate(a.manifest);
  a.meta = doc.value("meta", nlohmann::json::object());
  a.weights = read_sized_blob(dir / "weights.bin", count_params(a.manifest));
  a.biases = read_sized_blob(dir / "biases.bin", bias_count(a.manifest));

  const auto& mask_dir = doc.at("masks");
  if (!mask_dir.empty()) {
    const std::string bits = read_file(dir / "masks.bin");
    std::size_t offset = 0;
    for (const auto& entry : mask_dir) {
      const Index layer = entry.at("layer").get<Index>();
      if (layer < 0 || layer >= static_cast<Index>(a.manifest.layers.size()))
        throw ArchiveError("mask refers to missing layer " + std::to_string(layer));
      SparsityMask m{parse_sparsity_mode(entry.at("mode").get<std::string>()),
                     MaskMatrix::Zero(entry.at("rows").get<Index>(), entry.at("cols").get<Index>())};
      const auto n = static_cast<std::size_t>(m.bits.size());
      const std::size_t n_bytes = (n + 7) / 8;
      if (offset + n_bytes > bits.size())
        throw ArchiveError("masks.bin: expected at least " + std::to_string(offset + n_bytes) + " bytes, found " +
                           std::to_string(bits.size()));
      for (std::size_t k = 0; k < n; ++k)
        m.bits.data()[k] = (static_cast<unsigned char>(bits[offset + k / 8]) >> (k % 8)) & 1u;
      offset += n_bytes;
      a.masks.emplace(layer, std::move(m));
    }
    if (offset != bits.size())
      throw ArchiveError("masks.bin: expected " + std::to_string(offset) + " bytes, found " + std::to_string(bits.size()));
    check_masks(a.manifest, a.masks);
  }
  return a;
}

ModelArchive archive_from_network(const Network<float>& net, const LayerMasks& masks, nlohmann::json meta) {
  ModelArchive a;
  a.manifest = net.manifest();
  a.meta = std::move(meta);
  a.masks = masks;
  for (Index i : net.conv_layers()) {
    const auto& c = net.conv(i);
    a.weights.insert(a.weights.end(), c.weight.data(), c.weight.data() + c.weight.size());
    a.biases.insert(a.biases.end(), c.bias.data(), c.bias.data() + c.bias.size());
  }
  return a;
}

Network<float> network_from_archive(const ModelArchive& a) {
  Network<float> net(a.manifest);
  std::size_t w = 0, b = 0;
  for (Index i : net.conv_layers()) {
    auto& c = net.conv(i);
    if (w + c.weight.size() > a.weights.size() || b + c.bias.size() > a.biases.size())
      throw ArchiveError("archive blobs are shorter than the manifest requires");
    std::copy_n(a.weights.data() + w, c.weight.size(), c.weight.data());
    std::copy_n(a.biases.data() + b, c.bias.size(), c.bias.data());
    w += c.weight.size();
    b += c.bias.size();
  }
  return net;
}

}  // namespace structprune
