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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "s2m/scoring.hpp"

namespace {

using namespace s2m;

// One pixel, classes given in order.
LogitStack column(std::vector<float> logits) {
  const int c = static_cast<int>(logits.size());
  return LogitStack(c, 1, 1, std::move(logits));
}

TEST(Softmax, Examples) {
  auto p = softmax_probs(column({0.0f, 0.0f}));
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(1, 0), 0.5);

  p = softmax_probs(column({1000.0f, 0.0f}));
  EXPECT_TRUE(std::isfinite(p(0, 0)));
  EXPECT_NEAR(p(0, 0), 1.0, 1e-300);
  EXPECT_GE(p(1, 0), 0.0);
  EXPECT_LT(p(1, 0), 1e-300);

  p = softmax_probs(column({static_cast<float>(std::numbers::ln2), 0.0f}));
  EXPECT_NEAR(p(0, 0), 2.0 / 3.0, 1e-7);
  EXPECT_NEAR(p(1, 0), 1.0 / 3.0, 1e-7);
}

TEST(Softmax, ColumnsSumToOne) {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> d(0.0f, 10.0f);
  std::vector<float> v(7 * 6 * 5);
  for (auto& x : v) x = d(rng);
  const LogitStack s(7, 6, 5, v);
  const auto p = softmax_probs(s);
  for (std::size_t px = 0; px < s.pixels(); ++px) {
    double sum = 0;
    for (int c = 0; c < 7; ++c) sum += p(c, px);
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Entropy, UniformIsExactlyLog2C) {
  for (int c : {2, 3, 4, 19, 64}) {
    const auto h = entropy_score(LogitStack(c, 2, 1, std::vector<float>(static_cast<std::size_t>(2 * c), 1.25f)));
    EXPECT_EQ(h[0], static_cast<float>(std::log2(c))) << c;
    EXPECT_EQ(h[1], static_cast<float>(std::log2(c))) << c;
  }
  EXPECT_EQ(entropy_score(LogitStack(4, 1, 1, {0, 0, 0, 0}))[0], 2.0f);
}

TEST(Entropy, SaturatedIsZero) {
  EXPECT_EQ(entropy_score(column({1000.0f, 0.0f}))[0], 0.0f);
  EXPECT_EQ(entropy_score(column({0.0f, -5000.0f, -5000.0f}))[0], 0.0f);
}

TEST(Entropy, Ln3Example) {
  const double expected = -0.75 * std::log2(0.75) - 0.25 * std::log2(0.25);
  EXPECT_NEAR(expected, 0.811278, 1e-6);
  EXPECT_NEAR(pixel_entropy(std::vector<double>{std::log(3.0), 0.0}), expected, 1e-12);
}

TEST(Entropy, MatchesDirectFormulaOnRandomLogits) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> f(static_cast<std::size_t>(2 + trial % 10));
    for (auto& x : f) x = d(rng);
    double z = 0;
    for (double x : f) z += std::exp(x);
    double h = 0;
    for (double x : f) {
      const double p = std::exp(x) / z;
      h -= p * std::log2(p);
    }
    EXPECT_NEAR(pixel_entropy(f), h, 1e-12);
  }
}

TEST(Entropy, InvariantToShiftAndClassOrder) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> d(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> f(5);
    for (auto& x : f) x = d(rng);
    const double base = pixel_entropy(f);
    auto shifted = f;
    for (auto& x : shifted) x += 37.5;
    EXPECT_NEAR(pixel_entropy(shifted), base, 1e-12);
    auto perm = f;
    std::shuffle(perm.begin(), perm.end(), rng);
    EXPECT_NEAR(pixel_entropy(perm), base, 1e-12);
  }
}

TEST(Energy, UniformNineteenClasses) {
  const auto e = energy_score(LogitStack(19, 3, 1, std::vector<float>(57, 0.0f)), Temperature(1.0));
  for (float v : e.values()) EXPECT_EQ(v, static_cast<float>(-std::log(19.0)));
}

TEST(Energy, DominantLogitLimit) {
  const auto e = energy_score(column({500.0f, 0.0f, -3.0f}), Temperature(1.0));
  EXPECT_EQ(e[0], -500.0f);
  EXPECT_NEAR(pixel_energy(std::vector<double>{40.0, 0.0}, 1.0), -40.0, 1e-15);
}

TEST(Energy, LiteralForm) {
  const auto e = energy_score(column({0.0f, 0.0f}), Temperature(1.0), EnergyForm::Literal);
  EXPECT_EQ(e[0], -2.0f);
  EXPECT_DOUBLE_EQ(pixel_energy_literal(std::vector<double>{0.0, 0.0}, 2.0), -4.0);
}

TEST(Energy, ShiftCovarianceAndTemperature) {
  const std::vector<double> f{0.3, -1.2, 2.0};
  auto shifted = f;
  for (auto& x : shifted) x += 5.0;
  EXPECT_NEAR(pixel_energy(shifted, 1.0), pixel_energy(f, 1.0) - 5.0, 1e-12);
  double sum = 0;
  for (double x : f) sum += std::exp(x / 2.0);
  EXPECT_NEAR(pixel_energy(f, 2.0), -2.0 * std::log(sum), 1e-12);
  EXPECT_THROW(Temperature(0.0), Error);
  EXPECT_THROW(Temperature(-1.0), Error);
}

TEST(Energy, LiteralOverflowIsReported) {
  EXPECT_THROW(energy_score(column({1000.0f, 0.0f}), Temperature(1.0), EnergyForm::Literal), Error);
}

TEST(Scale, Examples) {
  const ScoreMap m(3, 1, {0.0f, 0.5f, 1.0f});
  EXPECT_EQ(scale_scores(m, 1.0), m);
  const auto s20 = scale_scores(m, 20.0);
  EXPECT_EQ(s20, ScoreMap(3, 1, {0.0f, 10.0f, 20.0f}));
  for (float v : s20.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 20.0f);
  }
  EXPECT_EQ(scale_scores(m, 0.0), ScoreMap::filled(3, 1, 0.0f));
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_scores(ScoreMap(3, 1, {-20.0f, -5.0f, 10.0f})), ScoreMap(3, 1, {0.0f, 0.5f, 1.0f}));
  EXPECT_EQ(normalize_scores(ScoreMap::filled(4, 2, 3.5f)), ScoreMap::filled(4, 2, 0.0f));
  EXPECT_EQ(normalize_scores(ScoreMap(1, 1, {3.0f}), ScoreRange{0.0, 2.0})[0], 1.0f);
  EXPECT_EQ(normalize_scores(ScoreMap(1, 1, {-3.0f}), ScoreRange{0.0, 2.0})[0], 0.0f);
  EXPECT_THROW(normalize_scores(ScoreMap(1, 1, {0.0f}), ScoreRange{2.0, 0.0}), Error);
}

TEST(Normalize, OutputInUnitIntervalWithEndpoints) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<float> d(-100.0f, 100.0f);
  std::vector<float> v(200);
  for (auto& x : v) x = d(rng);
  const auto n = normalized_values(ScoreMap(20, 10, v));
  EXPECT_EQ(*std::min_element(n.begin(), n.end()), 0.0);
  EXPECT_EQ(*std::max_element(n.begin(), n.end()), 1.0);
}

}  // namespace
