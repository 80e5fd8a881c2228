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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "s2m/metrics.hpp"

namespace {

using namespace s2m;

const ScoreMap kFour(4, 1, {0.1f, 0.4f, 0.6f, 0.9f});
const LabelMask kFourGt(4, 1, {0, 0, 1, 1});

oracle::Pixels pixels_of(const ScoreMap& m, const LabelMask& gt) {
  return {{m.values().begin(), m.values().end()}, {gt.values().begin(), gt.values().end()}};
}

TEST(Confusion, Examples) {
  EXPECT_EQ(confusion_at(kFour, LabelMask(4, 1, {255, 255, 255, 255}), 0.5), (ConfusionCounts{0, 0, 0, 0}));
  EXPECT_EQ(confusion_at(ScoreMap(4, 1, {0, 0, 1, 1}), kFourGt, 0.5), (ConfusionCounts{2, 0, 0, 2}));
  EXPECT_EQ(confusion_at(kFour, kFourGt, 0.5), (ConfusionCounts{2, 0, 0, 2}));
  // Strict comparison: a score equal to the threshold is not predicted.
  EXPECT_EQ(confusion_at(kFour, kFourGt, 0.6f), (ConfusionCounts{1, 0, 1, 2}));
  EXPECT_THROW(confusion_at(kFour, LabelMask(2, 2, {0, 0, 0, 0}), 0.5), Error);
}

TEST(Ratios, ZeroConventions) {
  EXPECT_EQ(iou({0, 0, 0, 5}), 0.0);
  EXPECT_EQ(f1({0, 3, 2, 5}), 0.0);
  EXPECT_EQ(iou({2, 1, 1, 0}), 0.5);
  // 2PR/(P+R) with P = 2/3, R = 2/3.
  EXPECT_NEAR(f1({2, 1, 1, 0}), 2.0 / 3.0, 1e-15);
}

TEST(ThresholdMap, Endpoints) {
  EXPECT_EQ(threshold_map(0.0, -20.0, 10.0), -20.0);
  EXPECT_EQ(threshold_map(1.0, -20.0, 10.0), 10.0);
  EXPECT_EQ(threshold_map(0.5, -20.0, 10.0), -5.0);
  EXPECT_EQ(threshold_map(0.0, 0.1f, 0.9f), static_cast<double>(0.1f));
  EXPECT_EQ(threshold_map(1.0, 0.1f, 0.9f), static_cast<double>(0.9f));
  EXPECT_THROW(threshold_map(0.5, 1.0, 0.0), Error);
}

TEST(Sweep, NoPositivesGivesZeroCurve) {
  const ScoreMap m(3, 1, {0.0f, 0.0f, 0.0f});
  const auto r = sweep(m, LabelMask(3, 1, {0, 0, 0}), {0.0, 1.0}, 100);
  for (double v : r.iou_curve) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.best_iou, 0.0);
}

TEST(Sweep, FourPixelBands) {
  const auto range = *evaluation_range(kFour, kFourGt);
  const auto r = sweep(kFour, kFourGt, range, 100);
  int bands[3] = {0, 0, 0};
  for (double v : r.iou_curve) {
    if (v == 2.0 / 3.0) ++bands[0];
    else if (v == 1.0) ++bands[1];
    else if (v == 0.5) ++bands[2];
    else ADD_FAILURE() << "unexpected IoU " << v;
  }
  EXPECT_EQ(bands[0], 38);
  EXPECT_EQ(bands[1], 25);
  EXPECT_EQ(bands[2], 37);
  EXPECT_EQ(r.best_iou, 1.0);
  EXPECT_EQ(r.best_index, 38u);
  const double exact_auiou = (38 * (2.0 / 3.0) + 25 + 37 * 0.5) / 100;
  const double exact_f1 = (38 * 0.8 + 25 + 37 * (2.0 / 3.0)) / 100;
  EXPECT_NEAR(auiou(r.iou_curve), exact_auiou, 1e-12);
  EXPECT_NEAR(auiou(r.iou_curve), 0.688333, 1e-6);
  EXPECT_NEAR(mean_f1(r.f1_curve), exact_f1, 1e-12);
  EXPECT_NEAR(mean_f1(r.f1_curve), 0.800667, 1e-6);
}

TEST(Sweep, PerfectBinaryMapOnUnitRange) {
  const ScoreMap m(4, 1, {0, 0, 1, 1});
  const auto r = sweep(m, kFourGt, {0.0, 1.0}, 100);
  for (double v : r.iou_curve) EXPECT_EQ(v, 1.0);
  for (double v : r.f1_curve) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(auiou(r.iou_curve), 1.0);
  EXPECT_EQ(mean_f1(r.f1_curve), 1.0);
}

TEST(Sweep, AllZeroPredictionScoresZero) {
  const auto r = sweep(ScoreMap::filled(4, 1, 0.0f), kFourGt, {0.0, 1.0}, 100);
  EXPECT_EQ(mean_f1(r.f1_curve), 0.0);
  EXPECT_EQ(auiou(r.iou_curve), 0.0);
}

TEST(Sweep, MatchesPerThresholdRecount) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 1 + trial % 23, h = 1 + trial % 17;
    const auto m = oracle::random_scores(rng, w, h, trial % 2 == 0);
    const auto gt = oracle::random_labels(rng, w, h);
    const ScoreRange range = trial % 3 ? evaluation_range(m, gt).value_or(ScoreRange{}) : ScoreRange{-1.0, 2.0};
    const int steps = 1 + trial * 7 % 120;
    const auto r = sweep(m, gt, range, steps);
    const auto px = pixels_of(m, gt);
    const auto grid = oracle::grid(range.min, range.max, steps);
    for (int k = 0; k < steps; ++k) {
      const auto c = oracle::count_at(px.scores, px.gt, grid[static_cast<std::size_t>(k)]);
      const auto& got = r.counts[static_cast<std::size_t>(k)];
      ASSERT_EQ(static_cast<double>(got.tp), c.tp) << trial << "/" << k;
      ASSERT_EQ(static_cast<double>(got.fp), c.fp) << trial << "/" << k;
      ASSERT_EQ(static_cast<double>(got.fn), c.fn) << trial << "/" << k;
      ASSERT_EQ(static_cast<double>(got.tn), c.tn) << trial << "/" << k;
    }
  }
}

TEST(Sweep, CurvesAreMonotoneInPredictedSet) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = oracle::random_scores(rng, 16, 16);
    const auto gt = oracle::random_labels(rng, 16, 16);
    const auto r = sweep(m, gt, *evaluation_range(m, gt), 100);
    for (std::size_t k = 1; k < r.counts.size(); ++k) {
      EXPECT_LE(r.counts[k].tp, r.counts[k - 1].tp);
      EXPECT_LE(r.counts[k].fp, r.counts[k - 1].fp);
      EXPECT_EQ(r.counts[k].total(), r.counts[0].total());
    }
    EXPECT_GE(r.best_iou, auiou(r.iou_curve));
  }
}

TEST(Auprc, Examples) {
  EXPECT_EQ(auprc(ScoreMap(4, 1, {0.0f, 0.1f, 0.8f, 0.9f}), kFourGt), 1.0);
  EXPECT_EQ(auprc(kFour, kFourGt), 1.0);
  const double anti = auprc(ScoreMap(4, 1, {0.9f, 0.8f, 0.1f, 0.0f}), kFourGt);
  EXPECT_NEAR(anti, 0.5 * (1.0 / 3.0) + 0.5 * (2.0 / 4.0), 1e-15);
  EXPECT_NEAR(anti, 0.416667, 1e-6);
  EXPECT_THROW(auprc(kFour, LabelMask(4, 1, {0, 0, 0, 255})), Error);
}

TEST(Auprc, TiesEnterTogether) {
  // All scores equal: one operating point, precision = prevalence.
  EXPECT_DOUBLE_EQ(auprc(ScoreMap::filled(4, 1, 1.0f), LabelMask(4, 1, {0, 1, 0, 0})), 0.25);
}

TEST(Fpr95, Examples) {
  EXPECT_EQ(fpr95(ScoreMap(4, 1, {0.0f, 0.1f, 0.8f, 0.9f}), kFourGt), 0.0);
  EXPECT_EQ(fpr95(kFour, kFourGt), 0.0);
  EXPECT_EQ(fpr95(ScoreMap::filled(4, 1, 0.3f), kFourGt), 1.0);
  EXPECT_THROW(fpr95(kFour, LabelMask(4, 1, {1, 1, 1, 1})), Error);
}

TEST(Ranking, MatchesEnumerationOracles) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 1 + trial % 19, h = 1 + trial % 11;
    const auto m = oracle::random_scores(rng, w, h, trial % 2 == 0);
    const auto gt = oracle::random_labels(rng, w, h);
    const auto px = pixels_of(m, gt);
    const auto table = rank_table(m, gt);
    std::uint64_t pos = 0, neg = 0;
    for (const auto& e : table) {
      pos += e.positives;
      neg += e.negatives;
    }
    if (pos > 0) EXPECT_NEAR(auprc(table), oracle::average_precision(px), 1e-12) << trial;
    if (pos > 0 && neg > 0) EXPECT_NEAR(fpr95(table), oracle::fpr_at_95(px), 1e-12) << trial;
  }
}

TEST(Ranking, InvariantUnderExp) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = oracle::random_scores(rng, 12, 12, true);
    const auto gt = oracle::random_labels(rng, 12, 12);
    std::vector<float> e(m.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::exp(m[i]);
    const ScoreMap me(12, 12, e);
    EXPECT_EQ(auprc(m, gt), auprc(me, gt));
    EXPECT_EQ(fpr95(m, gt), fpr95(me, gt));
  }
}

TEST(Ignore, LabelledIgnorePixelsNeverCount) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = oracle::random_scores(rng, 10, 10);
    const auto gt = oracle::random_labels(rng, 10, 10, 0.3, 0.3);
    // Rewriting scores under ignore pixels changes nothing.
    std::vector<float> v(m.values().begin(), m.values().end());
    for (std::size_t i = 0; i < v.size(); ++i)
      if (gt[i] == 255) v[i] = trial % 2 ? 1e6f : -1e6f;
    const ScoreMap m2(10, 10, v);
    const auto a = evaluate_dataset(std::span(&m, 1), std::span(&gt, 1), {}, Aggregation::Pool);
    const auto b = evaluate_dataset(std::span(&m2, 1), std::span(&gt, 1), {}, Aggregation::Pool);
    EXPECT_EQ(a.iou_curve, b.iou_curve);
    EXPECT_EQ(a.auprc, b.auprc);
    EXPECT_EQ(a.fpr95, b.fpr95);
  }
}

TEST(Histogram, BinsCoverRangeAndConserveCounts) {
  const ScoreRange r{0.0, 1.0};
  EXPECT_EQ(histogram_bin(0.0, r), 0u);
  EXPECT_EQ(histogram_bin(1.0, r), 99u);
  EXPECT_EQ(histogram_bin(0.505, r), 50u);
  EXPECT_EQ(histogram_bin(-3.0, r), 0u);
  EXPECT_EQ(histogram_bin(0.7, ScoreRange{1.0, 1.0}), 0u);

  std::mt19937_64 rng(15);
  const auto m = oracle::random_scores(rng, 20, 20);
  const auto gt = oracle::random_labels(rng, 20, 20);
  const auto ev = evaluate_image(m, gt, *evaluation_range(m, gt));
  std::uint64_t total = 0, expected = 0;
  for (std::size_t b = 0; b < kHistogramBins; ++b) total += ev.histogram_inlier[b] + ev.histogram_outlier[b];
  for (auto v : gt.values()) expected += v != 255;
  EXPECT_EQ(total, expected);
}

TEST(Aggregate, SingleImagePassesThroughBothModes) {
  std::mt19937_64 rng(16);
  const auto m = oracle::random_scores(rng, 9, 7);
  const auto gt = oracle::random_labels(rng, 9, 7);
  const auto ev = evaluate_image(m, gt, *evaluation_range(m, gt));
  for (auto mode : {Aggregation::Pool, Aggregation::Mean}) {
    const auto r = aggregate(std::span(&ev, 1), mode, {});
    EXPECT_EQ(r.best_iou, ev.metrics.best_iou);
    EXPECT_EQ(r.auiou, ev.metrics.auiou);
    EXPECT_EQ(r.mean_f1, ev.metrics.mean_f1);
    EXPECT_EQ(r.auprc, ev.metrics.auprc);
    EXPECT_EQ(r.fpr95, ev.metrics.fpr95);
    EXPECT_EQ(r.best_threshold, ev.metrics.best_threshold);
    EXPECT_EQ(r.iou_curve, ev.sweep.iou_curve);
  }
}

TEST(Aggregate, DuplicatedImagePoolsToSameScalars) {
  std::mt19937_64 rng(17);
  const auto m = oracle::random_scores(rng, 9, 7);
  const auto gt = oracle::random_labels(rng, 9, 7);
  const auto ev = evaluate_image(m, gt, *evaluation_range(m, gt));
  const std::vector<ImageEvaluation> two{ev, ev};
  const auto r = aggregate(two, Aggregation::Pool, {});
  EXPECT_EQ(r.best_iou, ev.metrics.best_iou);
  EXPECT_EQ(r.auiou, ev.metrics.auiou);
  EXPECT_EQ(r.mean_f1, ev.metrics.mean_f1);
  EXPECT_EQ(r.auprc, ev.metrics.auprc);
  EXPECT_EQ(r.fpr95, ev.metrics.fpr95);
}

TEST(Aggregate, PoolMatchesHandSummedCounts) {
  // Image A: [0.2, 0.8] gt [0, 1]; image B: [0.6, 0.4, 0.9] gt [0, 1, 255].
  const std::vector<ScoreMap> maps{ScoreMap(2, 1, {0.2f, 0.8f}), ScoreMap(3, 1, {0.6f, 0.4f, 0.9f})};
  const std::vector<LabelMask> gts{LabelMask(2, 1, {0, 1}), LabelMask(3, 1, {0, 1, 255})};
  const auto r = evaluate_dataset(maps, gts, {2, RangeMode::Unit}, Aggregation::Pool);
  // t_real = 0: everything predicted: TP 2, FP 2 -> IoU 0.5.
  // t_real = 0.5: A predicts 0.8 (TP); B predicts 0.6 (FP), misses 0.4 (FN): TP 1, FP 1, FN 1.
  EXPECT_DOUBLE_EQ(r.iou_curve[0], 0.5);
  EXPECT_DOUBLE_EQ(r.iou_curve[1], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.auiou, (0.5 + 1.0 / 3.0) / 2);
  EXPECT_DOUBLE_EQ(r.f1_curve[1], 0.5);
  // Ranking over {0.8+, 0.6-, 0.4+, 0.2-}: AP = 0.5*1 + 0.5*(2/3).
  EXPECT_NEAR(*r.auprc, 0.5 + 1.0 / 3.0, 1e-15);
  EXPECT_EQ(*r.fpr95, 0.5);
  ASSERT_TRUE(r.best_threshold);
  EXPECT_EQ(*r.best_threshold, 0.0);
}

TEST(Aggregate, MeanAveragesPerImageScalars) {
  const std::vector<ScoreMap> maps{ScoreMap(2, 1, {0.2f, 0.8f}), ScoreMap(2, 1, {0.9f, 0.1f})};
  const std::vector<LabelMask> gts{LabelMask(2, 1, {0, 1}), LabelMask(2, 1, {0, 1})};
  const auto r = evaluate_dataset(maps, gts, {10, RangeMode::Unit}, Aggregation::Mean);
  const auto a = evaluate_image(maps[0], gts[0], {0.0, 1.0}, 10), b = evaluate_image(maps[1], gts[1], {0.0, 1.0}, 10);
  EXPECT_DOUBLE_EQ(r.auiou, (a.metrics.auiou + b.metrics.auiou) / 2);
  EXPECT_DOUBLE_EQ(*r.auprc, (*a.metrics.auprc + *b.metrics.auprc) / 2);
  EXPECT_DOUBLE_EQ(*r.fpr95, (*a.metrics.fpr95 + *b.metrics.fpr95) / 2);
}

TEST(Aggregate, MeanSkipsUndefinedRankingMetrics) {
  const std::vector<ScoreMap> maps{ScoreMap(2, 1, {0.2f, 0.8f}), ScoreMap(2, 1, {0.9f, 0.1f})};
  const std::vector<LabelMask> gts{LabelMask(2, 1, {0, 1}), LabelMask(2, 1, {0, 0})};
  const auto r = evaluate_dataset(maps, gts, {}, Aggregation::Mean);
  EXPECT_EQ(*r.auprc, 1.0);
  EXPECT_EQ(*r.fpr95, 0.0);
  EXPECT_FALSE(r.per_image[1].auprc);
}

TEST(Aggregate, PoolWithPerImageRangesHasNoSharedThreshold) {
  const std::vector<ScoreMap> maps{ScoreMap(2, 1, {0.2f, 0.8f}), ScoreMap(2, 1, {5.0f, 1.0f})};
  const std::vector<LabelMask> gts{LabelMask(2, 1, {0, 1}), LabelMask(2, 1, {0, 1})};
  const auto r = evaluate_dataset(maps, gts, {100, RangeMode::Image}, Aggregation::Pool);
  EXPECT_FALSE(r.best_threshold);
  EXPECT_TRUE(r.thresholds.empty());
  const auto j = report_to_json(r);
  EXPECT_TRUE(j["best_threshold"].is_null());
}

TEST(Aggregate, RejectsMismatchedStepCounts) {
  const auto a = evaluate_image(kFour, kFourGt, {0, 1}, 10), b = evaluate_image(kFour, kFourGt, {0, 1}, 20);
  const std::vector<ImageEvaluation> both{a, b};
  EXPECT_THROW(aggregate(both, Aggregation::Pool, {}), Error);
  EXPECT_THROW(aggregate(std::span<const ImageEvaluation>{}, Aggregation::Pool, {}), Error);
}

TEST(Report, JsonHasStableKeys) {
  const std::vector<ScoreMap> maps{kFour};
  const std::vector<LabelMask> gts{kFourGt};
  const auto j = report_to_json(evaluate_dataset(maps, gts, {}, Aggregation::Pool));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  const std::vector<std::string> expected{"best_iou", "best_threshold", "auiou", "mean_f1", "auprc", "fpr95",
                                          "n_images", "sweep", "aggregation", "best_t", "zero_prompt_images",
                                          "iou_curve", "f1_curve", "per_image"};
  EXPECT_EQ(keys, expected);
  EXPECT_EQ(j["sweep"]["steps"], 100);
  EXPECT_EQ(j["iou_curve"].size(), 100u);
}

TEST(Modes, ParseAndPrint) {
  for (auto m : {RangeMode::Dataset, RangeMode::Image, RangeMode::Unit}) EXPECT_EQ(range_mode_from_string(to_string(m)), m);
  EXPECT_THROW(range_mode_from_string("global"), Error);
  EXPECT_EQ(aggregation_from_string("mean"), Aggregation::Mean);
  EXPECT_EQ(aggregation_from_string("pool"), Aggregation::Pool);
  EXPECT_THROW(aggregation_from_string("median"), Error);
}

}  // namespace
