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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/// Raster data model shared by every stage of the score-to-mask toolkit.
///
/// All rasters are row-major with a top-left origin; y grows downward.
/// Every raster type validates its invariants at construction and is
/// immutable afterwards, so a constructed value can be shared freely
/// between threads.
namespace s2m {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster(int width, int height, std::vector<T> values)
      : width_(width), height_(height), values_(std::move(values)) {
    if (width < 1 || height < 1) {
      throw Error("raster dimensions must be at least 1x1, got " + std::to_string(width) + "x" +
                  std::to_string(height));
    }
    if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error("raster payload has " + std::to_string(values_.size()) + " values, expected " +
                  std::to_string(static_cast<std::size_t>(width) * static_cast<std::size_t>(height)));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const T> values() const noexcept { return values_; }

  const T& operator[](std::size_t i) const noexcept { return values_[i]; }
  const T& operator()(int x, int y) const noexcept {
    return values_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
  }

  template <typename U>
  bool same_shape(const Raster<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.values_ == b.values_;
  }

 private:
  int width_;
  int height_;
  std::vector<T> values_;
};

/// Per-pixel anomaly scores; higher means more likely out-of-distribution.
class ScoreMap : public Raster<float> {
 public:
  ScoreMap(int width, int height, std::vector<float> values) : Raster(width, height, std::move(values)) {
    const auto v = this->values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) throw Error("non-finite value at index " + std::to_string(i));
    }
  }

  static ScoreMap filled(int width, int height, float value) {
    return ScoreMap(width, height,
                    std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) *
                                           static_cast<std::size_t>(std::max(height, 0)),
                                       value));
  }
};

namespace label {
inline constexpr std::uint8_t kInlier = 0;
inline constexpr std::uint8_t kOutlier = 1;
inline constexpr std::uint8_t kIgnore = 255;
}  // namespace label

/// Ternary ground truth: 0 in-distribution, 1 out-of-distribution, 255 ignored.
class LabelMask : public Raster<std::uint8_t> {
 public:
  LabelMask(int width, int height, std::vector<std::uint8_t> values) : Raster(width, height, std::move(values)) {
    const auto v = this->values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] != label::kInlier && v[i] != label::kOutlier && v[i] != label::kIgnore) {
        throw Error("label value " + std::to_string(v[i]) + " at index " + std::to_string(i) +
                    " not in {0,1,255}");
      }
    }
  }
};

/// Boolean raster stored as bytes holding 0 or 1.
class BinaryMask : public Raster<std::uint8_t> {
 public:
  BinaryMask(int width, int height, std::vector<std::uint8_t> values) : Raster(width, height, std::move(values)) {
    const auto v = this->values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] > 1) throw Error("binary mask value " + std::to_string(v[i]) + " at index " + std::to_string(i));
    }
  }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(values().begin(), values().end(), std::uint8_t{1}));
  }
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

class RgbImage : public Raster<Rgb> {
 public:
  using Raster::Raster;

  static RgbImage filled(int width, int height, Rgb color) {
    return RgbImage(width, height,
                    std::vector<Rgb>(static_cast<std::size_t>(std::max(width, 0)) *
                                         static_cast<std::size_t>(std::max(height, 0)),
                                     color));
  }
};

/// Final pipeline output. Zero marks an in-distribution pixel; any positive
/// value marks a predicted outlier pixel and carries its confidence.
class ConfidenceMap : public Raster<float> {
 public:
  ConfidenceMap(int width, int height, std::vector<float> values) : Raster(width, height, std::move(values)) {
    const auto v = this->values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] >= 0.0f && v[i] <= 1.0f)) {
        throw Error("confidence value at index " + std::to_string(i) + " outside [0,1]");
      }
    }
  }

  ScoreMap as_scores() const { return ScoreMap(width(), height(), {values().begin(), values().end()}); }
};

/// Class-major segmentation logits: value(c, x, y) = values[(c*H + y)*W + x].
class LogitStack {
 public:
  LogitStack(int classes, int width, int height, std::vector<float> values)
      : classes_(classes), width_(width), height_(height), values_(std::move(values)) {
    if (classes < 2) throw Error("logit stack needs at least 2 classes, got " + std::to_string(classes));
    if (width < 1 || height < 1) throw Error("logit stack dimensions must be at least 1x1");
    const std::size_t expected = static_cast<std::size_t>(classes) * static_cast<std::size_t>(width) *
                                 static_cast<std::size_t>(height);
    if (values_.size() != expected) {
      throw Error("logit payload has " + std::to_string(values_.size()) + " values, expected " +
                  std::to_string(expected));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) throw Error("non-finite value at index " + std::to_string(i));
    }
  }

  int classes() const noexcept { return classes_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }
  std::span<const float> values() const noexcept { return values_; }

  float operator()(int c, std::size_t pixel) const noexcept {
    return values_[static_cast<std::size_t>(c) * pixels() + pixel];
  }

 private:
  int classes_;
  int width_;
  int height_;
  std::vector<float> values_;
};

/// Axis-aligned pixel rectangle [x0, x1) x [y0, y1) with a prompt confidence.
struct BoxPrompt {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  double confidence = 1.0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  std::int64_t area() const noexcept { return static_cast<std::int64_t>(width()) * height(); }
  bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }

  friend bool operator==(const BoxPrompt&, const BoxPrompt&) = default;
};

inline std::string to_string(const BoxPrompt& b) {
  return "(" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," + std::to_string(b.x1) + "," +
         std::to_string(b.y1) + ")";
}

/// Throws unless the box is non-empty, lies in a width x height frame and
/// carries a confidence in [0,1].
inline void validate_box(const BoxPrompt& b, int width, int height) {
  if (!(b.x0 >= 0 && b.x0 < b.x1 && b.y0 >= 0 && b.y0 < b.y1)) {
    throw Error("box " + to_string(b) + " is empty or has negative origin");
  }
  if (b.x1 > width || b.y1 > height) {
    throw Error("box " + to_string(b) + " exceeds frame " + std::to_string(width) + "x" + std::to_string(height));
  }
  if (!(b.confidence >= 0.0 && b.confidence <= 1.0)) {
    throw Error("box " + to_string(b) + " confidence " + std::to_string(b.confidence) + " outside [0,1]");
  }
}

enum class Connectivity { Four = 4, Eight = 8 };

inline Connectivity connectivity_from_int(int n) {
  if (n == 4) return Connectivity::Four;
  if (n == 8) return Connectivity::Eight;
  throw Error("connectivity must be 4 or 8, got " + std::to_string(n));
}

/// Closed score interval used for normalization and threshold mapping.
struct ScoreRange {
  double min = 0.0;
  double max = 0.0;

  double span() const noexcept { return max - min; }
  bool degenerate() const noexcept { return !(max > min); }
  friend bool operator==(const ScoreRange&, const ScoreRange&) = default;
};

inline ScoreRange score_range(std::span<const float> values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {static_cast<double>(*lo), static_cast<double>(*hi)};
}

}  // namespace s2m
