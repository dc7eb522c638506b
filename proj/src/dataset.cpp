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

#include "structprune/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

namespace structprune {

std::string to_string(TaskKind task) { return task == TaskKind::Classification ? "classification" : "detection"; }

TaskKind parse_task_kind(const std::string& s) {
  if (s == "classification") return TaskKind::Classification;
  if (s == "detection") return TaskKind::Detection;
  throw ParseError("unknown task '" + s + "'");
}

std::span<const float> Dataset::image(Index i) const {
  if (i < 0 || i >= size()) throw IndexOutOfBounds("image index " + std::to_string(i) + " out of range");
  return {images.data() + i * image_size(), static_cast<std::size_t>(image_size())};
}

FeatureMap<float> Dataset::batch(std::span<const Index> indices) const {
  const Index n = static_cast<Index>(indices.size());
  auto fm = FeatureMap<float>::zeros(n, channels, height, width);
  const Index px = height * width;
  for (Index b = 0; b < n; ++b) {
    const auto img = image(indices[b]);
    for (Index c = 0; c < channels; ++c)
      std::copy_n(img.data() + c * px, px, fm.data.row(c).data() + b * px);
  }
  return fm;
}

namespace {

constexpr float kNoiseStd = 0.3f;

void add_noise(std::vector<float>& images, std::mt19937_64& rng, float stddev) {
  std::normal_distribution<float> noise(0.0f, stddev);
  for (auto& v : images) v += noise(rng);
}

}  // namespace

Dataset make_bar_classification_set(Index count, std::uint64_t seed, Index image_size) {
  if (image_size < 8) throw InvalidArgument("bar images need at least 8 pixels per side");
  Dataset ds;
  ds.task = TaskKind::Classification;
  ds.channels = 1;
  ds.height = ds.width = image_size;
  ds.classes = 4;
  ds.images.assign(static_cast<std::size_t>(count * image_size * image_size), 0.0f);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cls(0, 3);
  std::uniform_int_distribution<Index> len_dist(image_size / 3, image_size / 2);
  for (Index i = 0; i < count; ++i) {
    const int label = cls(rng);
    const Index len = len_dist(rng);
    std::uniform_int_distribution<Index> pos(0, image_size - len);
    std::uniform_int_distribution<Index> any(0, image_size - 1);
    float* img = ds.images.data() + i * image_size * image_size;
    const Index x0 = pos(rng), y0 = pos(rng), fixed = any(rng);
    for (Index s = 0; s < len; ++s) {
      Index y = 0, x = 0;
      switch (label) {
        case 0: y = fixed; x = x0 + s; break;
        case 1: y = y0 + s; x = fixed; break;
        case 2: y = y0 + s; x = x0 + s; break;
        default: y = y0 + s; x = x0 + len - 1 - s; break;
      }
      img[y * image_size + x] = 1.0f;
    }
    ds.labels.push_back(label);
  }
  add_noise(ds.images, rng, kNoiseStd);
  return ds;
}

Dataset make_rectangle_detection_set(Index count, std::uint64_t seed, Index image_size) {
  if (image_size < 32) throw InvalidArgument("detection images need at least 32 pixels per side");
  Dataset ds;
  ds.task = TaskKind::Detection;
  ds.channels = 1;
  ds.height = ds.width = image_size;
  ds.classes = 1;
  ds.images.assign(static_cast<std::size_t>(count * image_size * image_size), 0.0f);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_boxes(1, 3);
  std::uniform_int_distribution<Index> side(image_size / 8, image_size * 3 / 8);
  for (Index i = 0; i < count; ++i) {
    float* img = ds.images.data() + i * image_size * image_size;
    std::vector<BoundingBox> boxes;
    const int n = n_boxes(rng);
    for (int attempt = 0; static_cast<int>(boxes.size()) < n && attempt < 50; ++attempt) {
      const Index w = side(rng), h = side(rng);
      std::uniform_int_distribution<Index> px(0, image_size - w), py(0, image_size - h);
      const Index x0 = px(rng), y0 = py(rng);
      const BoundingBox b{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x0 + w),
                          static_cast<double>(y0 + h), 1.0};
      bool overlaps = false;
      for (const auto& o : boxes) overlaps = overlaps || iou(o, b) > 0.0;
      if (overlaps) continue;
      for (Index y = y0; y < y0 + h; ++y)
        for (Index x = x0; x < x0 + w; ++x) img[y * image_size + x] = 1.0f;
      boxes.push_back(b);
    }
    ds.boxes.push_back(std::move(boxes));
  }
  add_noise(ds.images, rng, kNoiseStd);
  return ds;
}

std::vector<ImageBoxes> truth_records(const Dataset& ds) {
  std::vector<ImageBoxes> out;
  for (std::size_t i = 0; i < ds.boxes.size(); ++i) out.push_back({std::to_string(i), ds.boxes[i]});
  return out;
}

std::vector<float> read_f32_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0)
    throw ArchiveError(path.string() + ": length " + std::to_string(bytes.size()) + " is not a multiple of 4 bytes");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t word;
    std::memcpy(&word, bytes.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap32(word);
    out[i] = std::bit_cast<float>(word);
  }
  return out;
}

void write_f32_blob(const std::filesystem::path& path, std::span<const float> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (float v : data) {
    auto word = std::bit_cast<std::uint32_t>(v);
    if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap32(word);
    out.write(reinterpret_cast<const char*>(&word), 4);
  }
  if (!out) throw Error("short write to " + path.string());
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  write_f32_blob(dir / "images.bin", ds.images);
  nlohmann::json side;
  side["task"] = to_string(ds.task);
  side["count"] = ds.size();
  side["channels"] = ds.channels;
  side["height"] = ds.height;
  side["width"] = ds.width;
  side["classes"] = ds.classes;
  if (ds.task == TaskKind::Classification) side["labels"] = ds.labels;
  std::ofstream(dir / "images.json") << side.dump(2) << '\n';
  if (ds.task == TaskKind::Detection) write_boxes_jsonl(dir / "boxes.jsonl", truth_records(ds), false);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "images.json");
  if (!in) throw ParseError("missing dataset sidecar " + (dir / "images.json").string());
  Dataset ds;
  try {
    const auto side = nlohmann::json::parse(in);
    ds.task = parse_task_kind(side.at("task").get<std::string>());
    ds.channels = side.at("channels").get<Index>();
    ds.height = side.at("height").get<Index>();
    ds.width = side.at("width").get<Index>();
    ds.classes = side.value("classes", Index{0});
    const Index count = side.at("count").get<Index>();
    ds.images = read_f32_blob(dir / "images.bin");
    if (static_cast<Index>(ds.images.size()) != count * ds.image_size())
      throw ParseError("images.bin holds " + std::to_string(ds.images.size()) + " floats, sidecar implies " +
                       std::to_string(count * ds.image_size()));
    if (ds.task == TaskKind::Classification) {
      ds.labels = side.at("labels").get<std::vector<int>>();
      if (static_cast<Index>(ds.labels.size()) != count) throw ParseError("label count does not match image count");
    } else {
      ds.boxes.assign(static_cast<std::size_t>(count), {});
      for (auto& rec : read_boxes_jsonl(dir / "boxes.jsonl")) {
        std::size_t pos = 0;
        const long id = std::stol(rec.image_id, &pos);
        if (pos != rec.image_id.size() || id < 0 || id >= count) throw ParseError("bad image_id '" + rec.image_id + "'");
        ds.boxes[static_cast<std::size_t>(id)] = std::move(rec.boxes);
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("dataset sidecar: " + std::string(ex.what()));
  }
  return ds;
}

}  // namespace structprune
