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

#include <random>

#include "s2m/synth.hpp"

/// Procedural scenes for desk-scale end-to-end runs: gradient backgrounds,
/// rectangle and ellipse outliers, and score maps equal to the label plus
/// optional Gaussian noise.
namespace s2m {

struct SceneConfig {
  int width = 256;
  int height = 192;
  double noise_sigma = 0.0;
  SynthConfig synth{1, 0.75, 1.25, 0};
};

struct Scene {
  RgbImage image;
  LabelMask label;
  ScoreMap scores;
  std::vector<BoxPrompt> boxes;
};

inline std::vector<RgbImage> procedural_backgrounds(int width, int height) {
  std::vector<RgbImage> out;
  for (int variant = 0; variant < 4; ++variant) {
    std::vector<Rgb> px;
    px.reserve(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        px.push_back({static_cast<std::uint8_t>((x * 255) / std::max(1, width - 1)),
                      static_cast<std::uint8_t>((y * 255) / std::max(1, height - 1)),
                      static_cast<std::uint8_t>(64 * variant)});
      }
    }
    out.emplace_back(width, height, std::move(px));
  }
  return out;
}

/// Rectangles and ellipses with sides between 10 and 28 pixels.
inline std::vector<OutlierObject> procedural_objects() {
  std::vector<OutlierObject> pool;
  for (int k = 0; k < 8; ++k) {
    const int w = 10 + 6 * (k % 4), h = 28 - 6 * (k % 4);
    const Rgb color{static_cast<std::uint8_t>(40 * k), static_cast<std::uint8_t>(255 - 30 * k), 200};
    pool.push_back(k % 2 ? make_ellipse_object(w, h, color) : make_rectangle_object(w, h, color));
  }
  return pool;
}

inline Scene make_scene(const SceneConfig& cfg, std::uint64_t index) {
  static thread_local std::vector<RgbImage> backgrounds;
  static thread_local std::pair<int, int> background_size{0, 0};
  if (background_size != std::pair{cfg.width, cfg.height}) {
    backgrounds = procedural_backgrounds(cfg.width, cfg.height);
    background_size = {cfg.width, cfg.height};
  }
  static const auto pool = procedural_objects();

  auto sample = synthesize(backgrounds, pool, cfg.synth, index);
  std::vector<float> scores(sample.label.size());
  auto rng = stream_rng(cfg.synth.seed ^ 0x5c0e5c0e5c0e5c0eULL, index);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma > 0.0 ? cfg.noise_sigma : 1.0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double base = sample.label[i] == label::kOutlier ? 1.0 : 0.0;
    scores[i] = static_cast<float>(cfg.noise_sigma > 0.0 ? base + noise(rng) : base);
  }
  return {std::move(sample.image), std::move(sample.label), ScoreMap(cfg.width, cfg.height, std::move(scores)),
          std::move(sample.boxes)};
}

}  // namespace s2m
