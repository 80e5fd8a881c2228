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

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "s2m/core.hpp"

/// Pixel-level evaluation: threshold sweep, best IoU, AuIoU, mean F1, AuPRC
/// and FPR95.
///
/// A pixel is predicted out-of-distribution when its score is strictly
/// greater than the threshold. Pixels labelled 255 are excluded from every
/// count, from the score range and from the histograms. All ratios are
/// evaluated in double precision; 0/0 is taken as 0.
namespace s2m {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline double iou(const ConfusionCounts& c) noexcept {
  const auto denom = c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

/// 2PR / (P + R), written as 2TP / (2TP + FP + FN); 0 when TP = 0.
inline double f1(const ConfusionCounts& c) noexcept {
  if (c.tp == 0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
}

namespace detail {
inline void check_shapes(const ScoreMap& map, const LabelMask& gt) {
  if (!map.same_shape(gt)) {
    throw Error("score map is " + std::to_string(map.width()) + "x" + std::to_string(map.height()) +
                " but label mask is " + std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
  }
}
}  // namespace detail

inline ConfusionCounts confusion_at(const ScoreMap& map, const LabelMask& gt, double t_real) {
  detail::check_shapes(map, gt);
  ConfusionCounts c;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (gt[i] == label::kIgnore) continue;
    const bool predicted = static_cast<double>(map[i]) > t_real;
    const bool outlier = gt[i] == label::kOutlier;
    if (predicted) {
      ++(outlier ? c.tp : c.fp);
    } else {
      ++(outlier ? c.fn : c.tn);
    }
  }
  return c;
}

/// t in [0,1] -> t * (S_max - S_min) + S_min.
inline double threshold_map(double t, double s_min, double s_max) {
  if (!(s_max >= s_min)) throw Error("threshold_map requires S_max >= S_min");
  if (t == 1.0) return s_max;  // t * (S_max - S_min) + S_min can miss S_max by an ulp
  return t * (s_max - s_min) + s_min;
}

inline double threshold_map(double t, ScoreRange range) { return threshold_map(t, range.min, range.max); }

enum class RangeMode { Dataset, Image, Unit };

inline std::string to_string(RangeMode m) {
  switch (m) {
    case RangeMode::Dataset: return "dataset";
    case RangeMode::Image: return "image";
    case RangeMode::Unit: return "unit";
  }
  return "dataset";
}

inline RangeMode range_mode_from_string(const std::string& s) {
  if (s == "dataset") return RangeMode::Dataset;
  if (s == "image") return RangeMode::Image;
  if (s == "unit") return RangeMode::Unit;
  throw Error("unknown sweep range '" + s + "' (expected dataset, image or unit)");
}

struct SweepConfig {
  int steps = 100;
  RangeMode range = RangeMode::Dataset;

  void validate() const {
    if (steps < 1) throw Error("sweep steps must be >= 1");
  }
};

/// Score range over the non-ignored pixels; empty when every pixel is ignored.
inline std::optional<ScoreRange> evaluation_range(const ScoreMap& map, const LabelMask& gt) {
  detail::check_shapes(map, gt);
  std::optional<ScoreRange> r;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (gt[i] == label::kIgnore) continue;
    const double v = map[i];
    if (!r) {
      r = ScoreRange{v, v};
    } else {
      r->min = std::min(r->min, v);
      r->max = std::max(r->max, v);
    }
  }
  return r;
}

inline std::optional<ScoreRange> merge_ranges(std::optional<ScoreRange> a, std::optional<ScoreRange> b) {
  if (!a) return b;
  if (!b) return a;
  return ScoreRange{std::min(a->min, b->min), std::max(a->max, b->max)};
}

/// Sweep range for one image under `mode`; images or datasets without any
/// evaluated pixel fall back to [0, 0].
inline ScoreRange resolve_range(RangeMode mode, std::optional<ScoreRange> image, std::optional<ScoreRange> dataset) {
  switch (mode) {
    case RangeMode::Unit: return {0.0, 1.0};
    case RangeMode::Image: return image.value_or(ScoreRange{});
    case RangeMode::Dataset: return dataset.value_or(ScoreRange{});
  }
  return {};
}

struct SweepResult {
  std::vector<double> thresholds;  // t_real for t = k / n
  std::vector<ConfusionCounts> counts;
  std::vector<double> iou_curve;
  std::vector<double> f1_curve;
  double best_iou = 0.0;
  std::size_t best_index = 0;  // first grid index reaching best_iou

  double best_t() const noexcept { return static_cast<double>(best_index) / static_cast<double>(iou_curve.size()); }
  double best_t_real() const noexcept { return thresholds.empty() ? 0.0 : thresholds[best_index]; }
};

inline std::vector<double> sweep_thresholds(ScoreRange range, int steps) {
  std::vector<double> t(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    t[static_cast<std::size_t>(k)] = threshold_map(static_cast<double>(k) / steps, range);
  }
  return t;
}

inline SweepResult curves_from_counts(std::vector<double> thresholds, std::vector<ConfusionCounts> counts) {
  SweepResult r{std::move(thresholds), std::move(counts), {}, {}, 0.0, 0};
  r.iou_curve.reserve(r.counts.size());
  r.f1_curve.reserve(r.counts.size());
  for (std::size_t k = 0; k < r.counts.size(); ++k) {
    r.iou_curve.push_back(iou(r.counts[k]));
    r.f1_curve.push_back(f1(r.counts[k]));
    if (r.iou_curve.back() > r.best_iou) {
      r.best_iou = r.iou_curve.back();
      r.best_index = k;
    }
  }
  return r;
}

/// Confusion counts at every grid threshold in one pass: each pixel is binned
/// by how many thresholds lie strictly below its score, then suffix sums give
/// the predicted-positive counts per threshold.
inline SweepResult sweep(const ScoreMap& map, const LabelMask& gt, ScoreRange range, int steps = 100) {
  detail::check_shapes(map, gt);
  if (steps < 1) throw Error("sweep steps must be >= 1");
  auto thresholds = sweep_thresholds(range, steps);
  const auto n = static_cast<std::size_t>(steps);
  std::vector<std::uint64_t> pos_hist(n + 1, 0), neg_hist(n + 1, 0);
  std::uint64_t positives = 0, negatives = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (gt[i] == label::kIgnore) continue;
    const double v = map[i];
    const auto below = static_cast<std::size_t>(std::lower_bound(thresholds.begin(), thresholds.end(), v) -
                                                thresholds.begin());
    if (gt[i] == label::kOutlier) {
      ++pos_hist[below];
      ++positives;
    } else {
      ++neg_hist[below];
      ++negatives;
    }
  }
  // A pixel with `below` = b is predicted positive for every k < b.
  std::vector<ConfusionCounts> counts(n);
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t k = n; k-- > 0;) {
    tp += pos_hist[k + 1];
    fp += neg_hist[k + 1];
    counts[k] = {tp, fp, positives - tp, negatives - fp};
  }
  return curves_from_counts(std::move(thresholds), std::move(counts));
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Area under the IoU curve: (1/n) sum_k IoU_k.
inline double auiou(std::span<const double> iou_curve) { return mean_of(iou_curve); }

inline double mean_f1(std::span<const double> f1_curve) { return mean_of(f1_curve); }

// ---------------------------------------------------------------------------
// Ranking metrics

/// Distinct scores in descending order with their outlier / inlier pixel counts.
struct RankEntry {
  float score = 0.0f;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
};
using RankTable = std::vector<RankEntry>;

namespace detail {
inline RankTable group_sorted(std::vector<std::pair<float, bool>>& samples) {
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  RankTable table;
  for (const auto& [score, outlier] : samples) {
    if (table.empty() || table.back().score != score) table.push_back({score, 0, 0});
    ++(outlier ? table.back().positives : table.back().negatives);
  }
  return table;
}
}  // namespace detail

inline RankTable rank_table(const ScoreMap& map, const LabelMask& gt) {
  detail::check_shapes(map, gt);
  std::vector<std::pair<float, bool>> samples;
  samples.reserve(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (gt[i] != label::kIgnore) samples.emplace_back(map[i], gt[i] == label::kOutlier);
  }
  return detail::group_sorted(samples);
}

inline RankTable merge_rank_tables(std::span<const RankTable* const> tables) {
  RankTable merged;
  for (const auto* t : tables) merged.insert(merged.end(), t->begin(), t->end());
  std::sort(merged.begin(), merged.end(), [](const RankEntry& a, const RankEntry& b) { return a.score > b.score; });
  RankTable out;
  for (const auto& e : merged) {
    if (out.empty() || out.back().score != e.score) {
      out.push_back(e);
    } else {
      out.back().positives += e.positives;
      out.back().negatives += e.negatives;
    }
  }
  return out;
}

/// Step-integrated average precision, sum_j (R_j - R_{j-1}) P_j, over a
/// descending sweep in which tied scores enter together.
inline double auprc(const RankTable& table) {
  std::uint64_t total_pos = 0;
  for (const auto& e : table) total_pos += e.positives;
  if (total_pos == 0) throw Error("undefined AP: no outlier pixels");
  double ap = 0.0;
  std::uint64_t tp = 0, fp = 0;
  for (const auto& e : table) {
    tp += e.positives;
    fp += e.negatives;
    if (e.positives == 0) continue;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += static_cast<double>(e.positives) / static_cast<double>(total_pos) * precision;
  }
  return ap;
}

inline double auprc(const ScoreMap& map, const LabelMask& gt) { return auprc(rank_table(map, gt)); }

/// Smallest false-positive rate over the operating points whose true-positive
/// rate is at least 95%; 1 if no operating point gets there.
inline double fpr95(const RankTable& table) {
  std::uint64_t total_pos = 0, total_neg = 0;
  for (const auto& e : table) {
    total_pos += e.positives;
    total_neg += e.negatives;
  }
  if (total_pos == 0) throw Error("FPR95 undefined: no outlier pixels");
  if (total_neg == 0) throw Error("FPR95 undefined: no inlier pixels");
  std::uint64_t tp = 0, fp = 0;
  for (const auto& e : table) {
    tp += e.positives;
    fp += e.negatives;
    // FPR is non-decreasing along the sweep, so the first qualifying point is the minimum.
    if (tp * 100 >= total_pos * 95) return static_cast<double>(fp) / static_cast<double>(total_neg);
  }
  return 1.0;
}

inline double fpr95(const ScoreMap& map, const LabelMask& gt) { return fpr95(rank_table(map, gt)); }

// ---------------------------------------------------------------------------
// Per-image evaluation and aggregation

inline constexpr std::size_t kHistogramBins = 100;

struct ImageMetrics {
  std::string name;
  double best_iou = 0.0;
  double best_t = 0.0;
  double best_threshold = 0.0;
  double auiou = 0.0;
  double mean_f1 = 0.0;
  std::optional<double> auprc;
  std::optional<double> fpr95;
  std::optional<double> threshold_free_iou;
  bool zero_prompt = false;
};

struct ImageEvaluation {
  ImageMetrics metrics;
  ScoreRange range;
  SweepResult sweep;
  RankTable ranking;
  std::optional<ConfusionCounts> threshold_free;
  std::vector<std::uint64_t> histogram_inlier;
  std::vector<std::uint64_t> histogram_outlier;
};

inline std::size_t histogram_bin(double v, ScoreRange range) {
  if (range.degenerate()) return 0;
  const double pos = (v - range.min) / range.span() * static_cast<double>(kHistogramBins);
  if (!(pos > 0.0)) return 0;
  return std::min(kHistogramBins - 1, static_cast<std::size_t>(pos));
}

inline ImageEvaluation evaluate_image(const ScoreMap& map, const LabelMask& gt, ScoreRange range, int steps = 100,
                                      std::string name = {}) {
  ImageEvaluation ev;
  ev.range = range;
  ev.sweep = sweep(map, gt, range, steps);
  ev.ranking = rank_table(map, gt);
  ev.histogram_inlier.assign(kHistogramBins, 0);
  ev.histogram_outlier.assign(kHistogramBins, 0);
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (gt[i] == label::kIgnore) continue;
    ++(gt[i] == label::kOutlier ? ev.histogram_outlier : ev.histogram_inlier)[histogram_bin(map[i], range)];
  }

  auto& m = ev.metrics;
  m.name = std::move(name);
  m.best_iou = ev.sweep.best_iou;
  m.best_t = ev.sweep.best_t();
  m.best_threshold = ev.sweep.best_t_real();
  m.auiou = auiou(ev.sweep.iou_curve);
  m.mean_f1 = mean_f1(ev.sweep.f1_curve);
  std::uint64_t pos = 0, neg = 0;
  for (const auto& e : ev.ranking) {
    pos += e.positives;
    neg += e.negatives;
  }
  if (pos > 0) m.auprc = auprc(ev.ranking);
  if (pos > 0 && neg > 0) m.fpr95 = fpr95(ev.ranking);
  return ev;
}

/// As evaluate_image, plus the threshold-free IoU of the support (value > 0).
inline ImageEvaluation evaluate_confidence(const ConfidenceMap& map, const LabelMask& gt, ScoreRange range,
                                           int steps = 100, std::string name = {}) {
  const auto scores = map.as_scores();
  auto ev = evaluate_image(scores, gt, range, steps, std::move(name));
  ev.threshold_free = confusion_at(scores, gt, 0.0);
  ev.metrics.threshold_free_iou = iou(*ev.threshold_free);
  return ev;
}

enum class Aggregation { Pool, Mean };

inline std::string to_string(Aggregation a) { return a == Aggregation::Pool ? "pool" : "mean"; }

inline Aggregation aggregation_from_string(const std::string& s) {
  if (s == "pool") return Aggregation::Pool;
  if (s == "mean" || s == "average") return Aggregation::Mean;
  throw Error("unknown aggregation '" + s + "' (expected pool or mean)");
}

struct MetricReport {
  Aggregation aggregation = Aggregation::Pool;
  SweepConfig sweep;
  std::size_t n_images = 0;
  double best_iou = 0.0;
  double best_t = 0.0;
  std::optional<double> best_threshold;  // absent when pooled images use different thresholds
  double auiou = 0.0;
  double mean_f1 = 0.0;
  std::optional<double> auprc;
  std::optional<double> fpr95;
  std::optional<double> threshold_free_iou;
  std::vector<double> thresholds;  // shared t_real grid, empty when not shared
  std::vector<double> iou_curve;
  std::vector<double> f1_curve;
  std::vector<std::uint64_t> histogram_inlier;
  std::vector<std::uint64_t> histogram_outlier;
  std::vector<ImageMetrics> per_image;
};

namespace detail {
inline std::optional<double> mean_defined(std::span<const ImageEvaluation> images,
                                          std::optional<double> ImageMetrics::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& ev : images) {
    if (const auto& v = ev.metrics.*field) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}
}  // namespace detail

/// Pool sums confusion counts per grid index (and merges rankings) before
/// forming ratios; Mean averages the per-image scalars and curves. Images
/// whose ranking metrics are undefined are skipped by Mean.
inline MetricReport aggregate(std::span<const ImageEvaluation> images, Aggregation mode, const SweepConfig& cfg) {
  if (images.empty()) throw Error("aggregate: no images");
  const std::size_t n = images.front().sweep.counts.size();
  for (const auto& ev : images) {
    if (ev.sweep.counts.size() != n) throw Error("aggregate: images were swept with different step counts");
  }

  MetricReport r;
  r.aggregation = mode;
  r.sweep = cfg;
  r.n_images = images.size();
  r.histogram_inlier.assign(kHistogramBins, 0);
  r.histogram_outlier.assign(kHistogramBins, 0);
  for (const auto& ev : images) {
    r.per_image.push_back(ev.metrics);
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
      r.histogram_inlier[b] += ev.histogram_inlier[b];
      r.histogram_outlier[b] += ev.histogram_outlier[b];
    }
  }
  bool shared_grid = true;
  for (const auto& ev : images) shared_grid = shared_grid && ev.sweep.thresholds == images.front().sweep.thresholds;

  if (mode == Aggregation::Pool) {
    std::vector<ConfusionCounts> counts(n);
    for (const auto& ev : images) {
      for (std::size_t k = 0; k < n; ++k) counts[k] += ev.sweep.counts[k];
    }
    auto pooled = curves_from_counts(shared_grid ? images.front().sweep.thresholds : std::vector<double>{},
                                     std::move(counts));
    r.best_iou = pooled.best_iou;
    r.best_t = pooled.best_t();
    if (shared_grid) r.best_threshold = pooled.best_t_real();
    r.auiou = auiou(pooled.iou_curve);
    r.mean_f1 = mean_f1(pooled.f1_curve);
    r.thresholds = std::move(pooled.thresholds);
    r.iou_curve = std::move(pooled.iou_curve);
    r.f1_curve = std::move(pooled.f1_curve);

    std::vector<const RankTable*> tables;
    for (const auto& ev : images) tables.push_back(&ev.ranking);
    const auto merged = merge_rank_tables(tables);
    std::uint64_t pos = 0, neg = 0;
    for (const auto& e : merged) {
      pos += e.positives;
      neg += e.negatives;
    }
    if (pos > 0) r.auprc = auprc(merged);
    if (pos > 0 && neg > 0) r.fpr95 = fpr95(merged);

    std::optional<ConfusionCounts> tf;
    for (const auto& ev : images) {
      if (!ev.threshold_free) continue;
      if (!tf) tf = ConfusionCounts{};
      *tf += *ev.threshold_free;
    }
    if (tf) r.threshold_free_iou = iou(*tf);
  } else {
    const double count = static_cast<double>(images.size());
    r.iou_curve.assign(n, 0.0);
    r.f1_curve.assign(n, 0.0);
    double best_threshold = 0.0;
    for (const auto& ev : images) {
      r.best_iou += ev.metrics.best_iou / count;
      r.best_t += ev.metrics.best_t / count;
      best_threshold += ev.metrics.best_threshold / count;
      r.auiou += ev.metrics.auiou / count;
      r.mean_f1 += ev.metrics.mean_f1 / count;
      for (std::size_t k = 0; k < n; ++k) {
        r.iou_curve[k] += ev.sweep.iou_curve[k] / count;
        r.f1_curve[k] += ev.sweep.f1_curve[k] / count;
      }
    }
    if (images.size() == 1) {
      // Exact pass-through; repeated division above can differ in the last bit.
      const auto& m = images.front().metrics;
      r.best_iou = m.best_iou;
      r.best_t = m.best_t;
      best_threshold = m.best_threshold;
      r.auiou = m.auiou;
      r.mean_f1 = m.mean_f1;
      r.iou_curve = images.front().sweep.iou_curve;
      r.f1_curve = images.front().sweep.f1_curve;
    }
    r.best_threshold = best_threshold;
    if (shared_grid) r.thresholds = images.front().sweep.thresholds;
    r.auprc = detail::mean_defined(images, &ImageMetrics::auprc);
    r.fpr95 = detail::mean_defined(images, &ImageMetrics::fpr95);
    r.threshold_free_iou = detail::mean_defined(images, &ImageMetrics::threshold_free_iou);
  }
  return r;
}

/// Evaluates aligned score maps and labels under cfg, resolving the sweep
/// range (dataset, per image, or unit) before sweeping.
inline MetricReport evaluate_dataset(std::span<const ScoreMap> maps, std::span<const LabelMask> labels,
                                     const SweepConfig& cfg, Aggregation mode,
                                     std::span<const std::string> names = {}) {
  cfg.validate();
  if (maps.size() != labels.size()) throw Error("evaluate_dataset: maps and labels differ in count");
  std::vector<std::optional<ScoreRange>> ranges;
  std::optional<ScoreRange> dataset;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    ranges.push_back(evaluation_range(maps[i], labels[i]));
    dataset = merge_ranges(dataset, ranges.back());
  }
  std::vector<ImageEvaluation> evals;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    evals.push_back(evaluate_image(maps[i], labels[i], resolve_range(cfg.range, ranges[i], dataset), cfg.steps,
                                   i < names.size() ? names[i] : std::to_string(i)));
  }
  return aggregate(evals, mode, cfg);
}

// ---------------------------------------------------------------------------
// Report serialization

inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json image_metrics_to_json(const ImageMetrics& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["best_iou"] = m.best_iou;
  j["best_t"] = m.best_t;
  j["best_threshold"] = m.best_threshold;
  j["auiou"] = m.auiou;
  j["mean_f1"] = m.mean_f1;
  j["auprc"] = optional_json(m.auprc);
  j["fpr95"] = optional_json(m.fpr95);
  if (m.threshold_free_iou) j["threshold_free_iou"] = *m.threshold_free_iou;
  j["zero_prompt"] = m.zero_prompt;
  return j;
}

inline nlohmann::ordered_json report_to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["best_iou"] = r.best_iou;
  j["best_threshold"] = optional_json(r.best_threshold);
  j["auiou"] = r.auiou;
  j["mean_f1"] = r.mean_f1;
  j["auprc"] = optional_json(r.auprc);
  j["fpr95"] = optional_json(r.fpr95);
  j["n_images"] = r.n_images;
  j["sweep"] = {{"steps", r.sweep.steps}, {"range", to_string(r.sweep.range)}};
  j["aggregation"] = to_string(r.aggregation);
  j["best_t"] = r.best_t;
  if (r.threshold_free_iou) j["threshold_free_iou"] = *r.threshold_free_iou;
  std::size_t zero_prompt = 0;
  for (const auto& m : r.per_image) zero_prompt += m.zero_prompt ? 1 : 0;
  j["zero_prompt_images"] = zero_prompt;
  j["iou_curve"] = r.iou_curve;
  j["f1_curve"] = r.f1_curve;
  j["per_image"] = nlohmann::ordered_json::array();
  for (const auto& m : r.per_image) j["per_image"].push_back(image_metrics_to_json(m));
  return j;
}

}  // namespace s2m
