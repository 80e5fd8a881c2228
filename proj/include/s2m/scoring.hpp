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

#include <numbers>
#include <optional>

#include "s2m/core.hpp"

/// Anomaly scores from segmentation logits, and score-map normalization.
namespace s2m {

class Temperature {
 public:
  explicit Temperature(double value) : value_(value) {
    if (!(value > 0.0) || !std::isfinite(value)) throw Error("temperature must be a finite positive number");
  }
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// Per-pixel class probabilities, class-major like LogitStack.
struct ProbabilityStack {
  int classes = 0;
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double operator()(int c, std::size_t pixel) const noexcept {
    return values[static_cast<std::size_t>(c) * static_cast<std::size_t>(width) * static_cast<std::size_t>(height) +
                  pixel];
  }
};

namespace detail {

template <typename F>
void for_each_pixel_logits(const LogitStack& logits, F&& f) {
  std::vector<double> column(static_cast<std::size_t>(logits.classes()));
  for (std::size_t p = 0; p < logits.pixels(); ++p) {
    for (int c = 0; c < logits.classes(); ++c) column[static_cast<std::size_t>(c)] = logits(c, p);
    f(p, std::span<const double>(column));
  }
}

inline ScoreMap to_scoremap(int width, int height, const std::vector<double>& values, const char* what) {
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<float>(values[i]);
    if (!std::isfinite(out[i])) throw Error(std::string(what) + ": non-finite result at index " + std::to_string(i));
  }
  return ScoreMap(width, height, std::move(out));
}

}  // namespace detail

/// Shannon entropy in bits of softmax(logits). Evaluated as
/// log2(Z) - sum_c p_c z_c / ln 2 with z = f - max f, so a uniform pixel
/// yields exactly log2(C) and saturated classes contribute nothing.
inline double pixel_entropy(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double z_sum = 0.0;
  for (double f : logits) z_sum += std::exp(f - top);
  double weighted = 0.0;
  for (double f : logits) {
    const double p = std::exp(f - top) / z_sum;
    weighted += p * (f - top);
  }
  const double h = std::log2(z_sum) - weighted / std::numbers::ln2;
  return std::clamp(h, 0.0, std::log2(static_cast<double>(logits.size())));
}

/// Log-sum-exp energy, -T log sum_c exp(f_c / T).
inline double pixel_energy(std::span<const double> logits, double temperature) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double f : logits) sum += std::exp((f - top) / temperature);
  return -(top + temperature * std::log(sum));
}

/// Energy exactly as -T sum_c exp(f_c / T), without the logarithm.
inline double pixel_energy_literal(std::span<const double> logits, double temperature) {
  double sum = 0.0;
  for (double f : logits) sum += std::exp(f / temperature);
  return -temperature * sum;
}

inline ProbabilityStack softmax_probs(const LogitStack& logits) {
  ProbabilityStack probs{logits.classes(), logits.width(), logits.height(), {}};
  probs.values.resize(logits.values().size());
  const std::size_t plane = logits.pixels();
  detail::for_each_pixel_logits(logits, [&](std::size_t p, std::span<const double> column) {
    const double top = *std::max_element(column.begin(), column.end());
    double sum = 0.0;
    for (double f : column) sum += std::exp(f - top);
    for (std::size_t c = 0; c < column.size(); ++c) probs.values[c * plane + p] = std::exp(column[c] - top) / sum;
  });
  return probs;
}

inline ScoreMap entropy_score(const LogitStack& logits) {
  std::vector<double> h(logits.pixels());
  detail::for_each_pixel_logits(logits, [&](std::size_t p, std::span<const double> column) { h[p] = pixel_entropy(column); });
  return detail::to_scoremap(logits.width(), logits.height(), h, "entropy score");
}

enum class EnergyForm {
  LogSumExp,
  Literal,
};

inline ScoreMap energy_score(const LogitStack& logits, Temperature temperature,
                             EnergyForm form = EnergyForm::LogSumExp) {
  std::vector<double> e(logits.pixels());
  const double t = temperature.value();
  detail::for_each_pixel_logits(logits, [&](std::size_t p, std::span<const double> column) {
    e[p] = form == EnergyForm::LogSumExp ? pixel_energy(column, t) : pixel_energy_literal(column, t);
  });
  return detail::to_scoremap(logits.width(), logits.height(), e, "energy score");
}

inline ScoreMap scale_scores(const ScoreMap& map, double factor) {
  if (!std::isfinite(factor)) throw Error("scale factor must be finite");
  std::vector<double> out(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = static_cast<double>(map[i]) * factor;
  return detail::to_scoremap(map.width(), map.height(), out, "scaled score");
}

/// Min-max normalization to [0,1] in double precision. A degenerate range
/// maps every pixel to 0.
inline std::vector<double> normalized_values(const ScoreMap& map, std::optional<ScoreRange> range = std::nullopt) {
  const ScoreRange r = range ? *range : score_range(map.values());
  if (range && !(r.max >= r.min)) throw Error("normalization range requires max >= min");
  std::vector<double> out(map.size(), 0.0);
  if (r.degenerate()) return out;
  const double span = r.span();
  for (std::size_t i = 0; i < map.size(); ++i) {
    out[i] = std::clamp((static_cast<double>(map[i]) - r.min) / span, 0.0, 1.0);
  }
  return out;
}

inline ScoreMap normalize_scores(const ScoreMap& map, std::optional<ScoreRange> range = std::nullopt) {
  const auto values = normalized_values(map, range);
  return detail::to_scoremap(map.width(), map.height(), values, "normalized score");
}

}  // namespace s2m
