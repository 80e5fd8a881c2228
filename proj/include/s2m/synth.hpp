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

#include "s2m/components.hpp"
#include "s2m/core.hpp"

/// Outlier-exposure synthesis: paste scaled outlier objects into inlier
/// images, producing the composite, its ternary label and box labels.
///
/// The placement transform is a uniform nearest-neighbour scale followed by
/// an integer translation, so every composite pixel is either an untouched
/// inlier pixel or a copied object pixel.
namespace s2m {

class OutlierObject {
 public:
  OutlierObject(RgbImage crop, BinaryMask mask) : crop_(std::move(crop)), mask_(std::move(mask)) {
    if (!crop_.same_shape(mask_)) throw Error("outlier object crop and mask dimensions differ");
    if (mask_.count() == 0) throw Error("outlier object mask has no object pixels");
  }

  const RgbImage& crop() const noexcept { return crop_; }
  const BinaryMask& mask() const noexcept { return mask_; }

 private:
  RgbImage crop_;
  BinaryMask mask_;
};

struct PlacementTransform {
  double scale = 1.0;
  int offset_x = 0;
  int offset_y = 0;
  friend bool operator==(const PlacementTransform&, const PlacementTransform&) = default;
};

struct SynthConfig {
  int objects_per_image = 1;
  double scale_min = 0.5;
  double scale_max = 2.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (objects_per_image < 1) throw Error("objects_per_image must be >= 1");
    if (!(scale_min > 0.0 && scale_min <= scale_max) || !std::isfinite(scale_max)) {
      throw Error("scale range must satisfy 0 < scale_min <= scale_max");
    }
  }
};

/// Independent, reproducible generator for one stream (image index, stem hash, ...).
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

/// Output extent of a nearest-neighbour rescale: round(n * scale), at least 1.
inline int scaled_extent(int n, double scale) {
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(n) * scale)));
}

/// Nearest-neighbour resample to out_w x out_h. Output pixel x reads source
/// column floor((x + 0.5) * w / out_w), evaluated in integers.
template <typename T>
std::vector<T> resize_nearest(const Raster<T>& src, int out_w, int out_h) {
  const auto sw = static_cast<std::int64_t>(src.width());
  const auto sh = static_cast<std::int64_t>(src.height());
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(out_w) * static_cast<std::size_t>(out_h));
  for (std::int64_t y = 0; y < out_h; ++y) {
    const auto sy = static_cast<int>(((2 * y + 1) * sh) / (2 * static_cast<std::int64_t>(out_h)));
    for (std::int64_t x = 0; x < out_w; ++x) {
      const auto sx = static_cast<int>(((2 * x + 1) * sw) / (2 * static_cast<std::int64_t>(out_w)));
      out.push_back(src(sx, sy));
    }
  }
  return out;
}

inline BinaryMask scale_mask(const BinaryMask& mask, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw Error("mask scale must be a finite positive number");
  const int w = scaled_extent(mask.width(), scale), h = scaled_extent(mask.height(), scale);
  return BinaryMask(w, h, resize_nearest(mask, w, h));
}

inline RgbImage scale_image(const RgbImage& image, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw Error("image scale must be a finite positive number");
  const int w = scaled_extent(image.width(), scale), h = scaled_extent(image.height(), scale);
  return RgbImage(w, h, resize_nearest(image, w, h));
}

struct Composite {
  RgbImage image;
  LabelMask label;
};

/// x_oe = (1 - T(y)) * x_in + T(y) * x_out, y_oe = union of T(y); objects are
/// pasted in list order, later ones overwriting earlier ones.
inline Composite compose(const RgbImage& inlier, std::span<const OutlierObject> objects,
                         std::span<const PlacementTransform> transforms) {
  if (objects.size() != transforms.size()) {
    throw Error("compose: " + std::to_string(objects.size()) + " objects but " + std::to_string(transforms.size()) +
                " transforms");
  }
  const auto width = static_cast<std::size_t>(inlier.width());
  std::vector<Rgb> pixels(inlier.values().begin(), inlier.values().end());
  std::vector<std::uint8_t> labels(inlier.size(), label::kInlier);

  for (std::size_t k = 0; k < objects.size(); ++k) {
    const auto& t = transforms[k];
    const int w = scaled_extent(objects[k].crop().width(), t.scale);
    const int h = scaled_extent(objects[k].crop().height(), t.scale);
    if (!(t.scale > 0.0) || t.offset_x < 0 || t.offset_y < 0 || t.offset_x + w > inlier.width() ||
        t.offset_y + h > inlier.height()) {
      throw Error("compose: transform " + std::to_string(k) + " places the object outside the frame");
    }
    const auto mask = resize_nearest(objects[k].mask(), w, h);
    const auto crop = resize_nearest(objects[k].crop(), w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto src = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
        if (!mask[src]) continue;
        const auto dst = static_cast<std::size_t>(y + t.offset_y) * width + static_cast<std::size_t>(x + t.offset_x);
        pixels[dst] = crop[src];
        labels[dst] = label::kOutlier;
      }
    }
  }
  return {RgbImage(inlier.width(), inlier.height(), std::move(pixels)),
          LabelMask(inlier.width(), inlier.height(), std::move(labels))};
}

/// Draws scale ~ U(scale_min, scale_max), shrunk to the largest scale that
/// fits the target, then an offset uniform over every in-frame position.
inline PlacementTransform sample_transform(const OutlierObject& object, int target_w, int target_h,
                                           const SynthConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const int ow = object.crop().width(), oh = object.crop().height();
  if (scaled_extent(ow, cfg.scale_min) > target_w || scaled_extent(oh, cfg.scale_min) > target_h) {
    throw Error("object of size " + std::to_string(ow) + "x" + std::to_string(oh) + " cannot fit a " +
                std::to_string(target_w) + "x" + std::to_string(target_h) + " frame at scale " +
                std::to_string(cfg.scale_min));
  }
  std::uniform_real_distribution<double> scale_dist(cfg.scale_min, cfg.scale_max);
  double scale = cfg.scale_min == cfg.scale_max ? cfg.scale_min : scale_dist(rng);
  const double fit = std::min(static_cast<double>(target_w) / ow, static_cast<double>(target_h) / oh);
  scale = std::max(cfg.scale_min, std::min(scale, fit));
  const int w = scaled_extent(ow, scale), h = scaled_extent(oh, scale);

  std::uniform_int_distribution<int> x_dist(0, target_w - w);
  std::uniform_int_distribution<int> y_dist(0, target_h - h);
  const int ox = x_dist(rng);
  const int oy = y_dist(rng);
  return {scale, ox, oy};
}

/// One minimal box per connected outlier component, sorted by (y0, x0).
/// Ignore pixels never form components.
inline std::vector<BoxPrompt> boxes_from_mask(const LabelMask& mask, Connectivity connectivity = Connectivity::Eight) {
  std::vector<std::uint8_t> fg(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) fg[i] = mask[i] == label::kOutlier;
  const auto labelled = label_components(fg, mask.width(), mask.height(), connectivity);
  std::vector<BoxPrompt> boxes;
  boxes.reserve(labelled.components.size());
  for (const auto& c : labelled.components) boxes.push_back(c.box);
  sort_boxes_by_position(boxes);
  return boxes;
}

// Procedural outlier objects.

inline OutlierObject make_rectangle_object(int width, int height, Rgb color) {
  return OutlierObject(RgbImage::filled(width, height, color),
                       BinaryMask(width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) *
                                                                               static_cast<std::size_t>(height),
                                                                           1)));
}

/// Ellipse inscribed in a width x height crop; pixel centres on or inside the
/// boundary are object pixels.
inline OutlierObject make_ellipse_object(int width, int height, Rgb color) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  const double rx = width / 2.0, ry = height / 2.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = (x + 0.5 - rx) / rx, dy = (y + 0.5 - ry) / ry;
      if (dx * dx + dy * dy <= 1.0) mask[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + x] = 1;
    }
  }
  return OutlierObject(RgbImage::filled(width, height, color), BinaryMask(width, height, std::move(mask)));
}

struct SynthSample {
  RgbImage image;
  LabelMask label;
  std::vector<BoxPrompt> boxes;
  std::vector<std::size_t> object_indices;
  std::vector<PlacementTransform> transforms;
};

/// Synthesizes composite number `index`: inlier `index % inliers.size()`,
/// objects drawn uniformly from the pool. Output depends only on the inputs,
/// cfg and index.
inline SynthSample synthesize(std::span<const RgbImage> inliers, std::span<const OutlierObject> pool,
                              const SynthConfig& cfg, std::uint64_t index,
                              Connectivity connectivity = Connectivity::Eight) {
  cfg.validate();
  if (inliers.empty()) throw Error("synthesize: no inlier images");
  if (pool.empty()) throw Error("synthesize: no outlier objects");
  auto rng = stream_rng(cfg.seed, index);
  const auto& inlier = inliers[index % inliers.size()];

  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<OutlierObject> chosen;
  std::vector<std::size_t> indices;
  std::vector<PlacementTransform> transforms;
  for (int k = 0; k < cfg.objects_per_image; ++k) {
    const std::size_t i = pick(rng);
    indices.push_back(i);
    chosen.push_back(pool[i]);
    transforms.push_back(sample_transform(pool[i], inlier.width(), inlier.height(), cfg, rng));
  }
  auto composite = compose(inlier, chosen, transforms);
  auto boxes = boxes_from_mask(composite.label, connectivity);
  return {std::move(composite.image), std::move(composite.label), std::move(boxes), std::move(indices),
          std::move(transforms)};
}

}  // namespace s2m
