// Copyright 2026 The S2M Toolkit Authors
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

#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "s2m/components.hpp"
#include "s2m/core.hpp"
#include "s2m/scoring.hpp"

/// Box prompts from anomaly scores: a deterministic reference generator,
/// score-noise augmentation, and the JSON boundary for externally generated
/// prompts.
namespace s2m {

struct NoiseSpec {
  double amplitude = 0.01;  // fraction of each score's magnitude
  std::uint64_t seed = 0;

  void validate() const {
    if (!(amplitude >= 0.0 && amplitude < 1.0)) throw Error("noise amplitude must lie in [0, 1)");
  }
};

/// v -> v * (1 + u), u ~ U(-p, p) i.i.d. per pixel.
inline ScoreMap perturb_scores(const ScoreMap& map, const NoiseSpec& spec) {
  spec.validate();
  if (spec.amplitude == 0.0) return map;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> fluctuation(-spec.amplitude, spec.amplitude);
  std::vector<float> out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(map[i]) * (1.0 + fluctuation(rng)));
  }
  return ScoreMap(map.width(), map.height(), std::move(out));
}

struct PromptGenConfig {
  double quantile = 0.95;
  int min_area = 16;
  double merge_iou = 0.5;
  Connectivity connectivity = Connectivity::Eight;

  void validate() const {
    if (!(quantile > 0.0 && quantile < 1.0)) throw Error("quantile must lie in (0, 1)");
    if (min_area < 0) throw Error("min_area must be non-negative");
    if (!(merge_iou >= 0.0 && merge_iou <= 1.0)) throw Error("merge_iou must lie in [0, 1]");
  }
};

inline double box_iou(const BoxPrompt& a, const BoxPrompt& b) {
  const std::int64_t iw = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const std::int64_t ih = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const std::int64_t inter = iw * ih;
  const std::int64_t uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline BoxPrompt bounding_union(const BoxPrompt& a, const BoxPrompt& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1), a.confidence};
}

// Merged boxes never get more than this many passes.
inline constexpr int kMaxMergeRounds = 100;

/// Reference prompt generator.
///
/// Normalizes the map per image, keeps pixels strictly above the
/// cfg.quantile order statistic, labels components, drops those smaller
/// than min_area, then repeatedly merges box pairs whose IoU exceeds
/// merge_iou into their joint bounding box. Each box's confidence is the
/// mean normalized score over the pixels of the components it covers.
/// Output is sorted by descending confidence, then position.
inline std::vector<BoxPrompt> generate_prompts(const ScoreMap& map, const PromptGenConfig& cfg = {}) {
  cfg.validate();
  const auto normalized = normalized_values(map);

  // Order statistic at rank floor(q * (N - 1)).
  auto sorted = normalized;
  const auto rank = static_cast<std::size_t>(std::floor(cfg.quantile * static_cast<double>(sorted.size() - 1)));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank), sorted.end());
  const double cut = sorted[rank];

  std::vector<std::uint8_t> fg(normalized.size());
  for (std::size_t i = 0; i < fg.size(); ++i) fg[i] = normalized[i] > cut;
  const auto labelled = label_components(fg, map.width(), map.height(), cfg.connectivity);

  struct Candidate {
    BoxPrompt box;
    double score_sum = 0.0;
    std::size_t pixels = 0;
  };
  std::vector<Candidate> candidates(labelled.components.size());
  for (std::size_t i = 0; i < labelled.labels.size(); ++i) {
    const auto l = labelled.labels[i];
    if (l == 0) continue;
    candidates[static_cast<std::size_t>(l - 1)].score_sum += normalized[i];
  }
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    candidates[k].box = labelled.components[k].box;
    candidates[k].pixels = labelled.components[k].area;
  }
  std::erase_if(candidates, [&](const Candidate& c) { return c.pixels < static_cast<std::size_t>(cfg.min_area); });
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.box.y0, a.box.x0, a.box.y1, a.box.x1) < std::tie(b.box.y0, b.box.x0, b.box.y1, b.box.x1);
  });

  for (int round = 0; round < kMaxMergeRounds; ++round) {
    bool merged = false;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      for (std::size_t j = i + 1; j < candidates.size();) {
        if (box_iou(candidates[i].box, candidates[j].box) > cfg.merge_iou) {
          candidates[i].box = bounding_union(candidates[i].box, candidates[j].box);
          candidates[i].score_sum += candidates[j].score_sum;
          candidates[i].pixels += candidates[j].pixels;
          candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
          j = i + 1;  // box i grew; rescan its partners
        } else {
          ++j;
        }
      }
    }
    if (!merged) break;
  }

  std::vector<BoxPrompt> boxes;
  boxes.reserve(candidates.size());
  for (const auto& c : candidates) {
    BoxPrompt b = c.box;
    b.confidence = std::clamp(c.score_sum / static_cast<double>(c.pixels), 0.0, 1.0);
    boxes.push_back(b);
  }
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const BoxPrompt& a, const BoxPrompt& b) { return a.confidence > b.confidence; });
  return boxes;
}

// ---------------------------------------------------------------------------
// Prompt JSON: {"width": W, "height": H, "boxes": [{"x0", "y0", "x1", "y1", "confidence"}, ...]}

struct PromptSet {
  int width = 0;
  int height = 0;
  std::vector<BoxPrompt> boxes;
  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

inline nlohmann::ordered_json prompts_to_json(const PromptSet& set) {
  nlohmann::ordered_json j;
  j["width"] = set.width;
  j["height"] = set.height;
  j["boxes"] = nlohmann::ordered_json::array();
  for (const auto& b : set.boxes) {
    j["boxes"].push_back({{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}, {"confidence", b.confidence}});
  }
  return j;
}

inline PromptSet prompts_from_json(const nlohmann::json& j) {
  auto require_int = [](const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_number_integer()) {
      throw Error("prompt JSON: " + where + " needs integer '" + key + "'");
    }
    const auto v = obj[key].get<std::int64_t>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      throw Error("prompt JSON: " + where + " '" + key + "' out of range");
    }
    return static_cast<int>(v);
  };
  PromptSet set;
  set.width = require_int(j, "width", "document");
  set.height = require_int(j, "height", "document");
  if (set.width < 1 || set.height < 1) throw Error("prompt JSON: width and height must be >= 1");
  if (!j.contains("boxes") || !j["boxes"].is_array()) throw Error("prompt JSON: 'boxes' must be an array");
  for (std::size_t i = 0; i < j["boxes"].size(); ++i) {
    const auto& jb = j["boxes"][i];
    const std::string where = "box " + std::to_string(i);
    BoxPrompt b{require_int(jb, "x0", where), require_int(jb, "y0", where), require_int(jb, "x1", where),
                require_int(jb, "y1", where), 0.0};
    if (!jb.contains("confidence") || !jb["confidence"].is_number()) {
      throw Error("prompt JSON: " + where + " needs numeric 'confidence'");
    }
    b.confidence = jb["confidence"].get<double>();
    try {
      validate_box(b, set.width, set.height);
    } catch (const Error& e) {
      throw Error("prompt JSON: " + where + ": " + e.what());
    }
    set.boxes.push_back(b);
  }
  return set;
}

inline PromptSet read_prompts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  try {
    return prompts_from_json(j);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline void write_prompts(const PromptSet& set, const std::filesystem::path& path) {
  for (const auto& b : set.boxes) validate_box(b, set.width, set.height);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << prompts_to_json(set).dump(2) << '\n';
  if (!out) throw Error("write failure on " + path.string());
}

}  // namespace s2m
