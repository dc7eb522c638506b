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

#include <fstream>
#include <random>

#include "structprune/archive.hpp"
#include "structprune/errors.hpp"

namespace sp = structprune;
namespace fs = std::filesystem;
using sp::Index;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("structprune_archive_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

sp::ModelArchive sample_archive(std::uint64_t seed) {
  sp::Network<float> net(sp::tiny_classifier_manifest());
  std::mt19937_64 rng(seed);
  net.init_weights(rng);
  std::uniform_real_distribution<float> u(-1, 1);
  for (Index i : net.conv_layers())
    for (Index k = 0; k < net.conv(i).bias.size(); ++k) net.conv(i).bias.data()[k] = u(rng);
  sp::LayerMasks masks;
  std::bernoulli_distribution coin(0.5);
  for (Index i : net.prunable_layers()) {
    const auto& w = net.conv(i).weight;
    std::vector<char> rows(w.rows()), cols(w.cols());
    for (auto& r : rows) r = coin(rng);
    for (auto& c : cols) c = coin(rng);
    masks.emplace(i, sp::SparsityMask::outer(sp::SparsityMode::Combined, rows, cols));
  }
  return sp::archive_from_network(net, masks, {{"seed", seed}});
}

// Structured iff some row set R and column set S give bits == 1_R 1_S^T.
bool structured_oracle(const sp::SparsityMask& m) {
  if (m.mode == sp::SparsityMode::Irregular) return false;
  std::vector<char> rows(m.rows(), 0), cols(m.cols(), 0);
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      if (m.bits(r, c)) rows[r] = cols[c] = 1;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      if ((m.bits(r, c) != 0) != (rows[r] && cols[c])) return false;
  const bool any = m.popcount() > 0;
  if (m.mode == sp::SparsityMode::Filter && any)
    for (char c : cols)
      if (!c) return false;
  if (m.mode == sp::SparsityMode::Column && any)
    for (char r : rows)
      if (!r) return false;
  return true;
}

}  // namespace

TEST(Archive, RoundTripIsBitExact) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto a = sample_archive(seed);
    const auto dir = scratch("roundtrip");
    sp::save_archive(dir, a);
    const auto b = sp::load_archive(dir);
    EXPECT_EQ(a, b);
    EXPECT_EQ(fs::file_size(dir / "weights.bin"), 4 * sp::count_params(a.manifest));
    // Saving again writes the same bytes.
    const auto dir2 = scratch("roundtrip2");
    sp::save_archive(dir2, b);
    for (const char* f : {"model.json", "weights.bin", "biases.bin", "masks.bin"})
      EXPECT_EQ(slurp(dir / f), slurp(dir2 / f)) << f;
  }
}

TEST(Archive, NetworkRoundTrip) {
  const auto a = sample_archive(9);
  const auto net = sp::network_from_archive(a);
  EXPECT_EQ(sp::archive_from_network(net, a.masks, a.meta), a);
}

TEST(Archive, TruncatedWeightsReportSizes) {
  const auto a = sample_archive(3);
  const auto dir = scratch("truncated");
  sp::save_archive(dir, a);
  const auto full = fs::file_size(dir / "weights.bin");
  fs::resize_file(dir / "weights.bin", full - 8);
  try {
    sp::load_archive(dir);
    FAIL() << "expected ArchiveError";
  } catch (const sp::ArchiveError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected " + std::to_string(full) + " bytes, found " + std::to_string(full - 8)),
              std::string::npos)
        << msg;
  }
}

TEST(Archive, TruncatedMasksRejected) {
  const auto dir = scratch("masks");
  sp::save_archive(dir, sample_archive(4));
  fs::resize_file(dir / "masks.bin", fs::file_size(dir / "masks.bin") - 1);
  EXPECT_THROW(sp::load_archive(dir), sp::ArchiveError);
}

TEST(Archive, VersionMismatchRejected) {
  const auto dir = scratch("version");
  sp::save_archive(dir, sample_archive(5));
  auto doc = nlohmann::json::parse(slurp(dir / "model.json"));
  doc["version"] = sp::kArchiveVersion + 1;
  std::ofstream(dir / "model.json") << doc.dump();
  try {
    sp::load_archive(dir);
    FAIL() << "expected ArchiveError";
  } catch (const sp::ArchiveError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(Archive, MissingDirectoryRejected) {
  EXPECT_THROW(sp::load_archive(scratch("absent")), sp::ArchiveError);
}

TEST(Archive, CompactionEligibilityMatchesOracle) {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.5), rare(0.1);
  const sp::SparsityMode modes[] = {sp::SparsityMode::Irregular, sp::SparsityMode::Filter, sp::SparsityMode::Column,
                                    sp::SparsityMode::Combined};
  int eligible = 0, ineligible = 0;
  for (int trial = 0; trial < 400; ++trial) {
    auto a = sample_archive(1);
    for (auto& [layer, m] : a.masks) {
      m.mode = modes[rng() % 4];
      const bool full_rows = m.mode == sp::SparsityMode::Column, full_cols = m.mode == sp::SparsityMode::Filter;
      std::vector<char> rows(m.rows()), cols(m.cols());
      for (auto& r : rows) r = full_rows || coin(rng);
      for (auto& c : cols) c = full_cols || coin(rng);
      m = sp::SparsityMask::outer(m.mode, rows, cols);
      if (rare(rng)) {
        const Index k = static_cast<Index>(rng() % m.bits.size());
        m.bits.data()[k] ^= 1;
      }
    }
    bool expected = !a.masks.empty();
    for (const auto& [layer, m] : a.masks) expected = expected && structured_oracle(m);
    EXPECT_EQ(a.compaction_eligible(), expected);
    (expected ? eligible : ineligible)++;
  }
  EXPECT_GT(eligible, 20);
  EXPECT_GT(ineligible, 20);
  auto none = sample_archive(1);
  none.masks.clear();
  EXPECT_FALSE(none.compaction_eligible());
}
