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

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "s2m/core.hpp"
#include "s2m/io.hpp"
#include "s2m/metrics.hpp"
#include "s2m/prompts.hpp"
#include "s2m/segmenter.hpp"

/// End-to-end harness: scores -> optional noise -> prompts -> per-prompt
/// masks -> fusion -> metrics, over a directory of aligned files.
namespace s2m {

inline constexpr const char* kVersion = "0.1.0";

enum class PromptSource { Reference, ExternalPrompts, ExternalMasks };

inline std::string to_string(PromptSource s) {
  switch (s) {
    case PromptSource::Reference: return "reference";
    case PromptSource::ExternalPrompts: return "external-prompts";
    case PromptSource::ExternalMasks: return "external-masks";
  }
  return "reference";
}

inline PromptSource prompt_source_from_string(const std::string& s) {
  if (s == "reference") return PromptSource::Reference;
  if (s == "external-prompts") return PromptSource::ExternalPrompts;
  if (s == "external-masks") return PromptSource::ExternalMasks;
  throw Error("unknown prompt source '" + s + "'");
}

struct PipelineConfig {
  PromptGenConfig prompts;
  SegmenterConfig segmenter;
  std::optional<double> noise;  // amplitude of the multiplicative score fluctuation
  std::uint64_t seed = 0;
  // Confidence maps live in [0,1], so the pipeline sweeps the unit interval by default.
  SweepConfig sweep{100, RangeMode::Unit};
  Aggregation aggregation = Aggregation::Pool;
  PromptSource source = PromptSource::Reference;
  int workers = 0;  // 0: one per hardware thread

  void validate() const {
    prompts.validate();
    segmenter.validate();
    if (noise) NoiseSpec{*noise, 0}.validate();
    sweep.validate();
    if (workers < 0) throw Error("workers must be >= 0");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_number(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

inline std::int64_t parse_integer(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw Error("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

}  // namespace detail

/// Parses a flat `key = value` document (a TOML subset: no tables, `#`
/// comments, strings in double quotes). Keys mirror PipelineConfig.
inline PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto where = "config line " + std::to_string(lineno);
    if (body.front() == '[') throw Error(where + ": tables are not supported (flat key = value only)");
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw Error(where + ": expected key = value");
    const auto key = detail::trim(body.substr(0, eq));
    auto value = detail::trim(body.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);

    try {
      if (key == "quantile") {
        cfg.prompts.quantile = detail::parse_number(value, key);
      } else if (key == "min_area") {
        cfg.prompts.min_area = static_cast<int>(detail::parse_integer(value, key));
      } else if (key == "merge_iou") {
        cfg.prompts.merge_iou = detail::parse_number(value, key);
      } else if (key == "connectivity") {
        cfg.prompts.connectivity = connectivity_from_int(static_cast<int>(detail::parse_integer(value, key)));
      } else if (key == "alpha") {
        cfg.segmenter.alpha = detail::parse_number(value, key);
      } else if (key == "margin") {
        cfg.segmenter.margin = detail::parse_number(value, key);
      } else if (key == "noise") {
        const double p = detail::parse_number(value, key);
        cfg.noise = p > 0.0 ? std::optional<double>(p) : std::nullopt;
      } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(detail::parse_integer(value, key));
      } else if (key == "steps") {
        cfg.sweep.steps = static_cast<int>(detail::parse_integer(value, key));
      } else if (key == "range") {
        cfg.sweep.range = range_mode_from_string(value);
      } else if (key == "aggregation" || key == "agg") {
        cfg.aggregation = aggregation_from_string(value);
      } else if (key == "source") {
        cfg.source = prompt_source_from_string(value);
      } else if (key == "workers") {
        cfg.workers = static_cast<int>(detail::parse_integer(value, key));
      } else {
        throw Error("unknown key '" + key + "'");
      }
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

inline PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config(buffer.str());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline nlohmann::ordered_json config_to_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["quantile"] = cfg.prompts.quantile;
  j["min_area"] = cfg.prompts.min_area;
  j["merge_iou"] = cfg.prompts.merge_iou;
  j["connectivity"] = static_cast<int>(cfg.prompts.connectivity);
  j["alpha"] = cfg.segmenter.alpha;
  j["margin"] = cfg.segmenter.margin;
  j["noise"] = cfg.noise ? nlohmann::ordered_json(*cfg.noise) : nlohmann::ordered_json(nullptr);
  j["seed"] = cfg.seed;
  j["steps"] = cfg.sweep.steps;
  j["range"] = to_string(cfg.sweep.range);
  j["aggregation"] = to_string(cfg.aggregation);
  j["source"] = to_string(cfg.source);
  return j;
}

// ---------------------------------------------------------------------------
// Per-image processing

struct StageTimes {
  double prompts_ms = 0.0;
  double segmentation_ms = 0.0;
  double fusion_ms = 0.0;
  double metrics_ms = 0.0;
  double total_ms = 0.0;
};

struct ImageOutcome {
  ConfidenceMap confidence;
  std::vector<BoxPrompt> prompts;  // empty when masks came from outside
  std::size_t prompt_count = 0;
  StageTimes times;
};

/// 64-bit FNV-1a, used to derive per-image random streams from file stems.
inline std::uint64_t stable_hash(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t noise_seed(std::uint64_t seed, std::string_view stem) noexcept {
  return stable_hash(stem) ^ (seed * 0x9E3779B97F4A7C15ULL);
}

namespace detail {
using Clock = std::chrono::steady_clock;
inline double elapsed_ms(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration<double, std::milli>(to - from).count();
}
}  // namespace detail

/// Runs noise, prompting, segmentation and fusion on one score map.
/// `external_prompts` replaces the reference generator; `external_masks`
/// replaces both prompting and segmentation.
inline ImageOutcome process_image(const ScoreMap& raw_scores, const PipelineConfig& cfg, std::string_view stem,
                                  const std::vector<BoxPrompt>* external_prompts = nullptr,
                                  const std::vector<PromptMask>* external_masks = nullptr) {
  const auto start = detail::Clock::now();
  StageTimes t;

  std::optional<ScoreMap> perturbed;
  if (cfg.noise) perturbed = perturb_scores(raw_scores, {*cfg.noise, noise_seed(cfg.seed, stem)});
  const ScoreMap& scores = perturbed ? *perturbed : raw_scores;

  std::vector<BoxPrompt> prompts;
  if (external_prompts) {
    prompts = *external_prompts;
  } else if (!external_masks) {
    prompts = generate_prompts(scores, cfg.prompts);
  }
  const auto prompted = detail::Clock::now();
  t.prompts_ms = detail::elapsed_ms(start, prompted);

  std::vector<PromptMask> masks;
  if (external_masks) {
    masks = *external_masks;
  } else if (!prompts.empty()) {
    const NormalizedScores normalized(scores);
    masks.reserve(prompts.size());
    for (const auto& box : prompts) masks.push_back(segment_with_box(normalized, box, cfg.segmenter));
  }
  const auto segmented = detail::Clock::now();
  t.segmentation_ms = detail::elapsed_ms(prompted, segmented);

  auto confidence = fuse_masks(masks, scores.width(), scores.height());
  const auto fused = detail::Clock::now();
  t.fusion_ms = detail::elapsed_ms(segmented, fused);
  t.total_ms = detail::elapsed_ms(start, fused);

  const std::size_t count = external_masks ? external_masks->size() : prompts.size();
  return {std::move(confidence), std::move(prompts), count, t};
}

// ---------------------------------------------------------------------------
// Visualization and curve export

/// Per-image min-max scaling to 0..255, rounding half up; constant maps are black.
inline Raster<std::uint8_t> visualization(const Raster<float>& map) {
  const auto range = score_range(map.values());
  std::vector<std::uint8_t> out(map.size(), 0);
  if (!range.degenerate()) {
    for (std::size_t i = 0; i < map.size(); ++i) {
      const double x = (static_cast<double>(map[i]) - range.min) / range.span();
      out[i] = static_cast<std::uint8_t>(std::clamp(std::floor(x * 255.0 + 0.5), 0.0, 255.0));
    }
  }
  return Raster<std::uint8_t>(map.width(), map.height(), std::move(out));
}

inline void render_visualization(const Raster<float>& map, const fs::path& out) {
  write_gray8(visualization(map), out);
}

/// Writes curve.csv (t,t_real,iou,f1; one row per grid step) and
/// histogram.csv (100 uniform bins over the sweep range, split by label).
inline void emit_curves(const MetricReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  auto open = [](const fs::path& p) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw Error("cannot open " + p.string() + " for writing");
    out.precision(17);
    return out;
  };
  if (report.iou_curve.empty()) throw Error("emit_curves: report has no curves");
  {
    auto out = open(dir / "curve.csv");
    out << "t,t_real,iou,f1\n";
    const auto n = report.iou_curve.size();
    for (std::size_t k = 0; k < n; ++k) {
      out << static_cast<double>(k) / static_cast<double>(n) << ',';
      if (!report.thresholds.empty()) out << report.thresholds[k];
      out << ',' << report.iou_curve[k] << ',' << report.f1_curve[k] << '\n';
    }
    if (!out) throw Error("write failure on " + (dir / "curve.csv").string());
  }
  {
    auto out = open(dir / "histogram.csv");
    out << "bin,t_lo,t_hi,inlier,outlier\n";
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
      out << b << ',' << static_cast<double>(b) / kHistogramBins << ',' << static_cast<double>(b + 1) / kHistogramBins
          << ',' << report.histogram_inlier[b] << ',' << report.histogram_outlier[b] << '\n';
    }
    if (!out) throw Error("write failure on " + (dir / "histogram.csv").string());
  }
}

/// One line per image: name and scalar metrics.
inline void write_metrics_csv(const MetricReport& report, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.precision(17);
  auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string(); };
  out << "name,best_iou,best_threshold,auiou,mean_f1,auprc,fpr95,threshold_free_iou,zero_prompt\n";
  for (const auto& m : report.per_image) {
    out << m.name << ',' << m.best_iou << ',' << m.best_threshold << ',' << m.auiou << ',' << m.mean_f1 << ','
        << opt(m.auprc) << ',' << opt(m.fpr95) << ',' << opt(m.threshold_free_iou) << ',' << (m.zero_prompt ? 1 : 0)
        << '\n';
  }
  if (!out) throw Error("write failure on " + path.string());
}

// ---------------------------------------------------------------------------
// Directory pairing

/// Pairing key of a file stem: the part after the first '_' ("img_000123" and
/// "gt_000123" both map to "000123"); stems without '_' are their own key.
inline std::string pairing_key(const fs::path& path) {
  const std::string stem = path.stem().string();
  const auto us = stem.find('_');
  return us == std::string::npos ? stem : stem.substr(us + 1);
}

inline std::map<std::string, fs::path> index_directory(const fs::path& dir, std::initializer_list<const char*> exts,
                                                       bool directories = false) {
  if (!fs::is_directory(dir)) throw Error(dir.string() + ": not a directory");
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    bool match = false;
    if (directories) {
      match = entry.is_directory();
    } else if (entry.is_regular_file()) {
      const auto ext = detail::lower_extension(entry.path());
      for (const char* e : exts) match = match || ext == e;
    }
    if (!match) continue;
    const auto key = directories ? [&] {
      const auto name = entry.path().filename().string();
      const auto us = name.find('_');
      return us == std::string::npos ? name : name.substr(us + 1);
    }() : pairing_key(entry.path());
    auto [it, inserted] = out.emplace(key, entry.path());
    if (!inserted) throw Error(dir.string() + ": files " + it->second.filename().string() + " and " +
                               entry.path().filename().string() + " share pairing key '" + key + "'");
  }
  return out;
}

struct PairedInputs {
  std::vector<std::string> keys;
  std::vector<fs::path> scores;
  std::vector<fs::path> labels;
};

inline PairedInputs pair_directories(const fs::path& scores_dir, const fs::path& gt_dir) {
  const auto scores = index_directory(scores_dir, {".npy", ".pfm"});
  const auto labels = index_directory(gt_dir, {".png", ".pgm"});
  if (scores.empty()) throw Error(scores_dir.string() + ": no inputs");
  PairedInputs p;
  for (const auto& [key, path] : scores) {
    const auto it = labels.find(key);
    if (it == labels.end()) throw Error(path.string() + ": no ground truth with pairing key '" + key + "'");
    p.keys.push_back(key);
    p.scores.push_back(path);
    p.labels.push_back(it->second);
  }
  for (const auto& [key, path] : labels) {
    if (!scores.count(key)) throw Error(path.string() + ": no score map with pairing key '" + key + "'");
  }
  return p;
}

// ---------------------------------------------------------------------------
// Worker pool

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Rethrows the
/// exception of the lowest failing index.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  std::size_t threads = workers > 0 ? static_cast<std::size_t>(workers)
                                    : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Pipeline

struct ImageRecord {
  std::string name;
  StageTimes timing;
  std::size_t prompt_count = 0;
  bool zero_prompt = false;
};

struct RunManifest {
  std::string version = kVersion;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;
  std::vector<ImageRecord> images;
};

struct PipelineResult {
  MetricReport report;
  RunManifest manifest;
};

struct PipelinePaths {
  fs::path scores_dir;
  fs::path gt_dir;
  std::optional<fs::path> boxes_dir;  // external prompts: boxes_<key>.json
  std::optional<fs::path> masks_dir;  // external masks: <prefix>_<key>/ with PNGs + confidences.json
  std::optional<fs::path> viz_dir;
};

/// Processes every score map / label pair and evaluates the fused confidence
/// maps. Images without prompts get an all-zero map and are flagged; nothing
/// is dropped. Reports depend only on inputs and config; timings go to the
/// manifest.
inline PipelineResult run_pipeline(const PipelinePaths& paths, const PipelineConfig& cfg) {
  cfg.validate();
  const auto inputs = pair_directories(paths.scores_dir, paths.gt_dir);
  std::map<std::string, fs::path> boxes, masks;
  if (cfg.source == PromptSource::ExternalPrompts) {
    if (!paths.boxes_dir) throw Error("external-prompts source requires a boxes directory");
    boxes = index_directory(*paths.boxes_dir, {".json"});
  } else if (cfg.source == PromptSource::ExternalMasks) {
    if (!paths.masks_dir) throw Error("external-masks source requires a masks directory");
    masks = index_directory(*paths.masks_dir, {}, true);
  }
  if (paths.viz_dir) fs::create_directories(*paths.viz_dir);

  const std::size_t n = inputs.keys.size();
  std::vector<std::optional<ConfidenceMap>> confidences(n);
  std::vector<std::optional<LabelMask>> labels(n);
  std::vector<std::optional<ScoreRange>> ranges(n);
  std::vector<ImageRecord> records(n);

  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const auto& key = inputs.keys[i];
    const auto stem = inputs.scores[i].stem().string();
    try {
      const auto scores = read_scoremap(inputs.scores[i]);
      auto gt = read_labelmask(inputs.labels[i]);
      if (!scores.same_shape(gt)) throw Error("score map and ground truth " + inputs.labels[i].string() + " differ in size");

      std::optional<std::vector<BoxPrompt>> ext_prompts;
      std::optional<std::vector<PromptMask>> ext_masks;
      if (cfg.source == PromptSource::ExternalPrompts) {
        const auto it = boxes.find(key);
        if (it == boxes.end()) throw Error("no prompt file with pairing key '" + key + "'");
        auto set = read_prompts(it->second);
        if (set.width != scores.width() || set.height != scores.height()) {
          throw Error(it->second.string() + ": prompt frame differs from score map size");
        }
        ext_prompts = std::move(set.boxes);
      } else if (cfg.source == PromptSource::ExternalMasks) {
        const auto it = masks.find(key);
        if (it == masks.end()) throw Error("no mask directory with pairing key '" + key + "'");
        ext_masks = read_mask_dir(it->second, scores.width(), scores.height());
      }

      auto outcome = process_image(scores, cfg, stem, ext_prompts ? &*ext_prompts : nullptr,
                                   ext_masks ? &*ext_masks : nullptr);
      records[i] = {key, outcome.times, outcome.prompt_count, outcome.prompt_count == 0};
      if (paths.viz_dir) {
        render_visualization(scores, *paths.viz_dir / (key + "_scores.png"));
        render_visualization(outcome.confidence, *paths.viz_dir / (key + "_confidence.png"));
      }
      ranges[i] = evaluation_range(outcome.confidence.as_scores(), gt);
      confidences[i] = std::move(outcome.confidence);
      labels[i] = std::move(gt);
    } catch (const std::exception& e) {
      throw Error(inputs.scores[i].string() + ": " + e.what());
    }
  });

  std::optional<ScoreRange> dataset;
  for (const auto& r : ranges) dataset = merge_ranges(dataset, r);

  std::vector<ImageEvaluation> evals(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const auto start = detail::Clock::now();
    evals[i] = evaluate_confidence(*confidences[i], *labels[i], resolve_range(cfg.sweep.range, ranges[i], dataset),
                                   cfg.sweep.steps, inputs.keys[i]);
    evals[i].metrics.zero_prompt = records[i].zero_prompt;
    confidences[i].reset();
    labels[i].reset();
    const double ms = detail::elapsed_ms(start, detail::Clock::now());
    records[i].timing.metrics_ms = ms;
    records[i].timing.total_ms += ms;
  });

  PipelineResult result;
  result.report = aggregate(evals, cfg.aggregation, cfg.sweep);
  result.manifest.seed = cfg.seed;
  result.manifest.config = config_to_json(cfg);
  result.manifest.images = std::move(records);
  return result;
}

/// Evaluates prediction maps (NPY/PFM) against labels without running the
/// pipeline. Maps are read twice so the dataset range never needs every map in memory.
inline MetricReport evaluate_directory(const fs::path& pred_dir, const fs::path& gt_dir, const SweepConfig& cfg,
                                       Aggregation mode, int workers = 0) {
  cfg.validate();
  const auto inputs = pair_directories(pred_dir, gt_dir);
  const std::size_t n = inputs.keys.size();
  std::vector<std::optional<ScoreRange>> ranges(n);
  if (cfg.range != RangeMode::Unit) {
    parallel_for(n, workers, [&](std::size_t i) {
      try {
        ranges[i] = evaluation_range(read_scoremap(inputs.scores[i]), read_labelmask(inputs.labels[i]));
      } catch (const std::exception& e) {
        throw Error(inputs.scores[i].string() + ": " + e.what());
      }
    });
  }
  std::optional<ScoreRange> dataset;
  for (const auto& r : ranges) dataset = merge_ranges(dataset, r);
  std::vector<ImageEvaluation> evals(n);
  parallel_for(n, workers, [&](std::size_t i) {
    try {
      evals[i] = evaluate_image(read_scoremap(inputs.scores[i]), read_labelmask(inputs.labels[i]),
                                resolve_range(cfg.range, ranges[i], dataset), cfg.steps, inputs.keys[i]);
    } catch (const std::exception& e) {
      throw Error(inputs.scores[i].string() + ": " + e.what());
    }
  });
  return aggregate(evals, mode, cfg);
}

// ---------------------------------------------------------------------------
// Timing

struct TimingSummary {
  std::size_t images = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  StageTimes mean_stage;
};

inline TimingSummary time_run(const RunManifest& manifest) {
  if (manifest.images.empty()) throw Error("time_run: empty manifest");
  TimingSummary s;
  s.images = manifest.images.size();
  std::vector<double> totals;
  const double n = static_cast<double>(s.images);
  for (const auto& r : manifest.images) {
    totals.push_back(r.timing.total_ms);
    s.mean_stage.prompts_ms += r.timing.prompts_ms / n;
    s.mean_stage.segmentation_ms += r.timing.segmentation_ms / n;
    s.mean_stage.fusion_ms += r.timing.fusion_ms / n;
    s.mean_stage.metrics_ms += r.timing.metrics_ms / n;
  }
  s.mean_ms = mean_of(totals);
  s.mean_stage.total_ms = s.mean_ms;
  std::sort(totals.begin(), totals.end());
  const std::size_t mid = totals.size() / 2;
  s.median_ms = totals.size() % 2 ? totals[mid] : 0.5 * (totals[mid - 1] + totals[mid]);
  return s;
}

inline nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["config"] = m.config;
  j["images"] = nlohmann::ordered_json::array();
  for (const auto& r : m.images) {
    j["images"].push_back({{"name", r.name},
                           {"prompt_count", r.prompt_count},
                           {"zero_prompt", r.zero_prompt},
                           {"timing_ms",
                            {{"prompts", r.timing.prompts_ms},
                             {"segmentation", r.timing.segmentation_ms},
                             {"fusion", r.timing.fusion_ms},
                             {"metrics", r.timing.metrics_ms},
                             {"total", r.timing.total_ms}}}});
  }
  if (!m.images.empty()) {
    const auto t = time_run(m);
    j["summary"] = {{"images", t.images}, {"mean_ms", t.mean_ms}, {"median_ms", t.median_ms}};
  }
  return j;
}

inline void write_json(const nlohmann::ordered_json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failure on " + path.string());
}

}  // namespace s2m
