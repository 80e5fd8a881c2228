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

#include <deque>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "s2m/core.hpp"
#include "s2m/io.hpp"
#include "s2m/scoring.hpp"

/// Box-prompted segmentation and fusion of per-prompt masks into the final
/// confidence map.
namespace s2m {

struct SegmenterConfig {
  double alpha = 0.5;   // growth level as a fraction of the seed score
  double margin = 0.1;  // box expansion per side, as a fraction of box size

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("alpha must lie in (0, 1]");
    if (!(margin >= 0.0) || !std::isfinite(margin)) throw Error("margin must be a finite non-negative number");
  }
};

struct PromptMask {
  BinaryMask mask;
  double confidence = 1.0;
};

/// Per-image min-max normalized scores, computed once and shared by every
/// prompt of the image.
struct NormalizedScores {
  explicit NormalizedScores(const ScoreMap& map)
      : width(map.width()), height(map.height()), values(normalized_values(map)) {}

  int width;
  int height;
  std::vector<double> values;

  double operator()(int x, int y) const noexcept {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

/// Region of a box grown by margin * (box width, box height) on each side,
/// clamped to the frame. Expansions round half away from zero.
inline BoxPrompt expand_box(const BoxPrompt& box, double margin, int width, int height) {
  const int dx = static_cast<int>(std::lround(margin * box.width()));
  const int dy = static_cast<int>(std::lround(margin * box.height()));
  return {std::max(0, box.x0 - dx), std::max(0, box.y0 - dy), std::min(width, box.x1 + dx),
          std::min(height, box.y1 + dy), box.confidence};
}

/// Seeded region growing inside the expanded box.
///
/// The seed is the highest normalized score inside the original box (first in
/// raster order on ties). The mask is the 4-connected set of pixels reachable
/// from the seed within the expanded box whose score is at least
/// alpha * seed score. A seed scoring 0 carries no signal and yields just the
/// seed pixel.
inline PromptMask segment_with_box(const NormalizedScores& scores, const BoxPrompt& box,
                                   const SegmenterConfig& cfg = {}) {
  cfg.validate();
  validate_box(box, scores.width, scores.height);
  const BoxPrompt region = expand_box(box, cfg.margin, scores.width, scores.height);

  int seed_x = box.x0, seed_y = box.y0;
  double seed_score = scores(seed_x, seed_y);
  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) {
      if (scores(x, y) > seed_score) {
        seed_score = scores(x, y);
        seed_x = x;
        seed_y = y;
      }
    }
  }

  const auto w = static_cast<std::size_t>(scores.width);
  std::vector<std::uint8_t> mask(scores.values.size(), 0);
  auto index = [w](int x, int y) { return static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x); };
  mask[index(seed_x, seed_y)] = 1;

  if (seed_score > 0.0) {
    const double level = cfg.alpha * seed_score;
    std::deque<std::pair<int, int>> frontier{{seed_x, seed_y}};
    constexpr int kDx[4] = {1, -1, 0, 0};
    constexpr int kDy[4] = {0, 0, 1, -1};
    while (!frontier.empty()) {
      const auto [x, y] = frontier.front();
      frontier.pop_front();
      for (int k = 0; k < 4; ++k) {
        const int nx = x + kDx[k], ny = y + kDy[k];
        if (!region.contains(nx, ny)) continue;
        auto& m = mask[index(nx, ny)];
        if (m || scores(nx, ny) < level) continue;
        m = 1;
        frontier.emplace_back(nx, ny);
      }
    }
  }
  return {BinaryMask(scores.width, scores.height, std::move(mask)), box.confidence};
}

inline PromptMask segment_with_box(const ScoreMap& map, const BoxPrompt& box, const SegmenterConfig& cfg = {}) {
  return segment_with_box(NormalizedScores(map), box, cfg);
}

/// Union of mask supports; each covered pixel takes the minimum confidence
/// of the masks covering it, uncovered pixels are 0.
inline ConfidenceMap fuse_masks(std::span<const PromptMask> masks, int width, int height) {
  const std::size_t n = static_cast<std::size_t>(std::max(width, 1)) * static_cast<std::size_t>(std::max(height, 1));
  std::vector<float> fused(n, std::numeric_limits<float>::infinity());
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const auto& m = masks[k];
    if (m.mask.width() != width || m.mask.height() != height) {
      throw Error("fuse_masks: mask " + std::to_string(k) + " is " + std::to_string(m.mask.width()) + "x" +
                  std::to_string(m.mask.height()) + ", expected " + std::to_string(width) + "x" +
                  std::to_string(height));
    }
    if (!(m.confidence >= 0.0 && m.confidence <= 1.0)) {
      throw Error("fuse_masks: mask " + std::to_string(k) + " confidence outside [0,1]");
    }
    // A positive confidence must stay positive after narrowing.
    float c = static_cast<float>(m.confidence);
    if (c == 0.0f && m.confidence > 0.0) c = std::numeric_limits<float>::denorm_min();
    const auto v = m.mask.values();
    for (std::size_t i = 0; i < n; ++i) {
      if (v[i]) fused[i] = std::min(fused[i], c);
    }
  }
  for (auto& f : fused) {
    if (std::isinf(f)) f = 0.0f;
  }
  return ConfidenceMap(width, height, std::move(fused));
}

/// Threshold-free final mask: value > 0.
inline BinaryMask binarize_confidence(const ConfidenceMap& map) {
  std::vector<std::uint8_t> out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = map[i] > 0.0f;
  return BinaryMask(map.width(), map.height(), std::move(out));
}

// ---------------------------------------------------------------------------
// Externally produced masks: one PNG per prompt plus index-aligned
// confidences, either a bare JSON array or {"confidences": [...]}.

inline std::vector<double> read_confidences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  const nlohmann::json& list = j.is_object() && j.contains("confidences") ? j["confidences"] : j;
  if (!list.is_array()) throw Error(path.string() + ": expected an array of confidences");
  std::vector<double> out;
  for (const auto& v : list) {
    if (!v.is_number()) throw Error(path.string() + ": confidence entries must be numbers");
    const double c = v.get<double>();
    if (!(c >= 0.0 && c <= 1.0)) throw Error(path.string() + ": confidence " + std::to_string(c) + " outside [0,1]");
    out.push_back(c);
  }
  return out;
}

inline std::vector<PromptMask> read_masks(std::span<const std::filesystem::path> mask_paths,
                                          const std::filesystem::path& confidences_path, int width, int height) {
  const auto confidences = read_confidences(confidences_path);
  if (confidences.size() != mask_paths.size()) {
    throw Error("read_masks: " + std::to_string(mask_paths.size()) + " masks but " +
                std::to_string(confidences.size()) + " confidences");
  }
  std::vector<PromptMask> out;
  out.reserve(mask_paths.size());
  for (std::size_t i = 0; i < mask_paths.size(); ++i) {
    auto mask = read_binarymask(mask_paths[i]);
    if (mask.width() != width || mask.height() != height) {
      throw Error(mask_paths[i].string() + ": mask is " + std::to_string(mask.width()) + "x" +
                  std::to_string(mask.height()) + ", expected " + std::to_string(width) + "x" +
                  std::to_string(height));
    }
    out.push_back({std::move(mask), confidences[i]});
  }
  return out;
}

/// Reads every .png/.pgm in `dir` (lexicographic order) with confidences
/// from `confidences_path`, defaulting to dir/confidences.json.
inline std::vector<PromptMask> read_mask_dir(const std::filesystem::path& dir, int width, int height,
                                             std::optional<std::filesystem::path> confidences_path = std::nullopt) {
  if (!std::filesystem::is_directory(dir)) throw Error(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = detail::lower_extension(entry.path());
    if (entry.is_regular_file() && (ext == ".png" || ext == ".pgm")) paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  return read_masks(paths, confidences_path.value_or(dir / "confidences.json"), width, height);
}

}  // namespace s2m
