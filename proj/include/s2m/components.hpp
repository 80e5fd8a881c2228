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

#include <numeric>
#include <tuple>

#include "s2m/core.hpp"

namespace s2m {

struct Component {
  BoxPrompt box;  // minimal bounding box, confidence 1
  std::size_t area = 0;
};

/// Labels are 0 for background and 1..components.size() otherwise, numbered
/// in raster order of each component's first pixel.
struct ComponentLabels {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;
  std::vector<Component> components;
};

namespace detail {

class DisjointSet {
 public:
  std::int32_t make() {
    parent_.push_back(static_cast<std::int32_t>(parent_.size()));
    return parent_.back();
  }
  std::int32_t find(std::int32_t x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Keep the smaller (earlier) root so first-pixel order is preserved.
    if (a < b) {
      parent_[static_cast<std::size_t>(b)] = a;
    } else {
      parent_[static_cast<std::size_t>(a)] = b;
    }
  }

 private:
  std::vector<std::int32_t> parent_;
};

}  // namespace detail

/// Two-pass union-find labelling of the nonzero pixels of `foreground`.
inline ComponentLabels label_components(std::span<const std::uint8_t> foreground, int width, int height,
                                        Connectivity connectivity) {
  const auto w = static_cast<std::size_t>(width);
  const auto h = static_cast<std::size_t>(height);
  if (foreground.size() != w * h) throw Error("component labelling: foreground size mismatch");

  ComponentLabels out{width, height, std::vector<std::int32_t>(w * h, -1), {}};
  detail::DisjointSet sets;
  const bool eight = connectivity == Connectivity::Eight;

  auto provisional = [&](std::size_t x, std::size_t y) -> std::int32_t {
    return out.labels[y * w + x];
  };

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!foreground[y * w + x]) continue;
      std::int32_t label = -1;
      auto join = [&](std::int32_t neighbour) {
        if (neighbour < 0) return;
        if (label < 0) {
          label = neighbour;
        } else {
          sets.unite(label, neighbour);
        }
      };
      if (x > 0) join(provisional(x - 1, y));
      if (y > 0) {
        join(provisional(x, y - 1));
        if (eight) {
          if (x > 0) join(provisional(x - 1, y - 1));
          if (x + 1 < w) join(provisional(x + 1, y - 1));
        }
      }
      if (label < 0) label = sets.make();
      out.labels[y * w + x] = label;
    }
  }

  // Second pass: compact roots to 1..n in first-appearance order.
  std::vector<std::int32_t> compact;
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    auto& l = out.labels[i];
    if (l < 0) {
      l = 0;
      continue;
    }
    const auto root = static_cast<std::size_t>(sets.find(l));
    if (compact.size() <= root) compact.resize(root + 1, 0);
    if (compact[root] == 0) {
      out.components.push_back({});
      compact[root] = static_cast<std::int32_t>(out.components.size());
      const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      out.components.back().box = {x, y, x + 1, y + 1, 1.0};
    }
    l = compact[root];
    auto& c = out.components[static_cast<std::size_t>(l - 1)];
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    c.box.x0 = std::min(c.box.x0, x);
    c.box.y0 = std::min(c.box.y0, y);
    c.box.x1 = std::max(c.box.x1, x + 1);
    c.box.y1 = std::max(c.box.y1, y + 1);
    ++c.area;
  }
  return out;
}

/// Orders boxes by (y0, x0, y1, x1).
inline void sort_boxes_by_position(std::vector<BoxPrompt>& boxes) {
  std::sort(boxes.begin(), boxes.end(), [](const BoxPrompt& a, const BoxPrompt& b) {
    return std::tie(a.y0, a.x0, a.y1, a.x1) < std::tie(b.y0, b.x0, b.y1, b.x1);
  });
}

}  // namespace s2m
