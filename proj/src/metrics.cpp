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

#include "structprune/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <json.hpp>

#include "structprune/errors.hpp"

namespace structprune {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::string to_string(ApInterpolation interp) {
  return interp == ApInterpolation::AllPoint ? "all-point" : "11-point";
}

ApInterpolation parse_ap_interpolation(const std::string& s) {
  if (s == "all-point") return ApInterpolation::AllPoint;
  if (s == "11-point") return ApInterpolation::ElevenPoint;
  throw InvalidArgument("unknown AP interpolation '" + s + "'");
}

MatchResult greedy_match(const std::vector<BoundingBox>& preds, const std::vector<BoundingBox>& truths,
                         double threshold) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  MatchResult out;
  std::vector<bool> taken(truths.size(), false);
  for (std::size_t p : order) {
    double best = -1.0;
    std::size_t best_t = truths.size();
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (taken[t]) continue;
      const double v = iou(preds[p], truths[t]);
      if (v > best) {
        best = v;
        best_t = t;
      }
    }
    const bool hit = best_t < truths.size() && best > threshold;
    if (hit) taken[best_t] = true;
    out.scores.push_back(preds[p].score);
    out.true_positive.push_back(hit);
  }
  return out;
}

double average_precision(const std::vector<BoundingBox>& preds, const std::vector<BoundingBox>& truths,
                         double threshold, ApInterpolation interp) {
  if (truths.empty()) return preds.empty() ? 1.0 : 0.0;
  if (preds.empty()) return 0.0;
  const auto match = greedy_match(preds, truths, threshold);
  const double n_truth = static_cast<double>(truths.size());
  std::vector<double> precision, recall;
  double tp = 0;
  for (std::size_t i = 0; i < match.true_positive.size(); ++i) {
    tp += match.true_positive[i] ? 1.0 : 0.0;
    precision.push_back(tp / static_cast<double>(i + 1));
    recall.push_back(tp / n_truth);
  }

  if (interp == ApInterpolation::ElevenPoint) {
    double sum = 0;
    for (int k = 0; k <= 10; ++k) {
      const double r = k / 10.0;
      double p = 0;
      for (std::size_t i = 0; i < recall.size(); ++i)
        if (recall[i] >= r) p = std::max(p, precision[i]);
      sum += p;
    }
    return sum / 11.0;
  }

  // Area under the monotone precision envelope.
  std::vector<double> env(precision.size());
  double running = 0;
  for (std::size_t i = precision.size(); i-- > 0;) env[i] = running = std::max(running, precision[i]);
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * env[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

double map_at(const std::vector<ImageBoxes>& preds, const std::vector<ImageBoxes>& truths, double threshold,
              ApInterpolation interp) {
  if (truths.empty()) throw InvalidArgument("mAP needs at least one ground-truth image record");
  std::map<std::string, const ImageBoxes*> truth_by_id;
  for (const auto& t : truths)
    if (!truth_by_id.emplace(t.image_id, &t).second) throw InvalidArgument("duplicate truth image id '" + t.image_id + "'");
  std::map<std::string, std::vector<BoundingBox>> pred_by_id;
  for (const auto& p : preds) {
    if (!truth_by_id.count(p.image_id)) throw InvalidArgument("prediction for unknown image '" + p.image_id + "'");
    auto& dst = pred_by_id[p.image_id];
    dst.insert(dst.end(), p.boxes.begin(), p.boxes.end());
  }
  double sum = 0;
  static const std::vector<BoundingBox> kNone;
  for (const auto& t : truths) {
    auto it = pred_by_id.find(t.image_id);
    sum += average_precision(it == pred_by_id.end() ? kNone : it->second, t.boxes, threshold, interp);
  }
  return sum / static_cast<double>(truths.size());
}

std::vector<double> default_iou_thresholds() {
  std::vector<double> out;
  for (int i = 0; i < 8; ++i) out.push_back((40 + 5 * i) / 100.0);
  return out;
}

double EvalSweep::at(double threshold) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    if (std::abs(thresholds[i] - threshold) < 1e-12) return map[i];
  throw InvalidArgument("threshold not in sweep");
}

EvalSweep map_sweep(const std::vector<ImageBoxes>& preds, const std::vector<ImageBoxes>& truths,
                    const std::vector<double>& thresholds, ApInterpolation interp) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] < 0 || thresholds[i] > 1) throw InvalidArgument("IoU threshold outside [0, 1]");
    if (i > 0 && thresholds[i] <= thresholds[i - 1]) throw InvalidArgument("IoU thresholds must increase strictly");
  }
  EvalSweep sweep{thresholds, {}, interp};
  for (double t : thresholds) sweep.map.push_back(map_at(preds, truths, t, interp));
  return sweep;
}

double anchor_distance(const AnchorSize& a, const AnchorSize& b) {
  const double inter = std::min(a.w, b.w) * std::min(a.h, b.h);
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? 1.0 - inter / uni : 0.0;
}

std::vector<AnchorSize> kmeans_anchors(const std::vector<AnchorSize>& boxes, std::size_t k, std::uint64_t seed,
                                       AnchorDistance distance, int max_iterations) {
  if (k == 0) throw InvalidArgument("k must be positive");
  if (boxes.size() < k)
    throw InvalidArgument("k-means needs at least k=" + std::to_string(k) + " boxes, got " + std::to_string(boxes.size()));
  for (const auto& b : boxes)
    if (!(b.w > 0 && b.h > 0)) throw InvalidArgument("box sizes must be positive");

  const auto dist = [&](const AnchorSize& a, const AnchorSize& c) {
    if (distance == AnchorDistance::OneMinusIou) return anchor_distance(a, c);
    return std::hypot(a.w - c.w, a.h - c.h);
  };

  std::vector<std::size_t> perm(boxes.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<AnchorSize> centers;
  for (std::size_t i = 0; i < k; ++i) centers.push_back(boxes[perm[i]]);

  std::vector<std::size_t> assign(boxes.size(), k);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = dist(boxes[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
    }
    if (!changed) break;

    std::vector<AnchorSize> sum(k);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      sum[assign[i]].w += boxes[i].w;
      sum[assign[i]].h += boxes[i].h;
      ++count[assign[i]];
    }
    std::vector<bool> reseeded(boxes.size(), false);
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) {
        centers[c] = {sum[c].w / count[c], sum[c].h / count[c]};
        continue;
      }
      std::size_t far = boxes.size();
      double far_d = -1;
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (reseeded[i]) continue;
        const double d = dist(boxes[i], centers[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      reseeded[far] = true;
      centers[c] = boxes[far];
    }
  }

  std::sort(centers.begin(), centers.end(), [](const AnchorSize& a, const AnchorSize& b) {
    const double aa = a.w * a.h, ba = b.w * b.h;
    return aa != ba ? aa < ba : a.w < b.w;
  });
  return centers;
}

std::vector<AnchorSize> reference_anchors() {
  return {{40, 39}, {63, 49}, {48, 69}, {75, 74}, {58, 102}, {83, 108}, {67, 148}, {89, 154}, {94, 202}};
}

std::vector<ImageBoxes> read_boxes_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open boxes file " + path.string());
  std::vector<ImageBoxes> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ImageBoxes img;
      const auto& id = j.at("image_id");
      img.image_id = id.is_string() ? id.get<std::string>() : id.dump();
      for (const auto& b : j.at("boxes")) {
        if (b.size() != 4 && b.size() != 5) throw ParseError("box must have 4 or 5 numbers");
        BoundingBox box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>(),
                        b.size() == 5 ? b[4].get<double>() : 1.0};
        if (!box.valid()) throw ParseError("box has max < min");
        img.boxes.push_back(box);
      }
      out.push_back(std::move(img));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    } catch (const ParseError& ex) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

void write_boxes_jsonl(const std::filesystem::path& path, const std::vector<ImageBoxes>& images, bool with_scores) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  std::ofstream out(tmp, std::ios::trunc);
  if (!out) throw Error("cannot write " + tmp.string());
  for (const auto& img : images) {
    nlohmann::json j;
    j["image_id"] = img.image_id;
    j["boxes"] = nlohmann::json::array();
    for (const auto& b : img.boxes) {
      nlohmann::json arr = {b.x_min, b.y_min, b.x_max, b.y_max};
      if (with_scores) arr.push_back(b.score);
      j["boxes"].push_back(std::move(arr));
    }
    out << j.dump() << '\n';
  }
  out.close();
  if (!out) throw Error("write failed: " + tmp.string());
  std::filesystem::rename(tmp, path);
}

}  // namespace structprune
