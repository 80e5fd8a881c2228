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

// s2m: command-line front end for the score-to-mask toolkit.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "s2m/s2m.hpp"

namespace {

namespace fs = std::filesystem;

std::string numbered(const char* prefix, std::uint64_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06llu%s", prefix, static_cast<unsigned long long>(i), ext);
  return buf;
}

struct ScoreArgs {
  std::string logits, method = "energy", out;
  double temperature = 1.0;
  bool literal = false;
  std::optional<double> scale;
};

int run_score(const ScoreArgs& a) {
  const auto logits = s2m::read_logits(a.logits);
  s2m::ScoreMap scores = a.method == "entropy"
                             ? s2m::entropy_score(logits)
                             : s2m::energy_score(logits, s2m::Temperature(a.temperature),
                                                 a.literal ? s2m::EnergyForm::Literal : s2m::EnergyForm::LogSumExp);
  if (a.scale) scores = s2m::scale_scores(scores, *a.scale);
  s2m::write_scoremap(scores, a.out);
  return 0;
}

struct PromptArgs {
  std::string scores, out;
  s2m::PromptGenConfig cfg;
  int connectivity = 8;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

int run_prompts(PromptArgs a) {
  auto scores = s2m::read_scoremap(a.scores);
  if (a.noise > 0.0) scores = s2m::perturb_scores(scores, {a.noise, a.seed});
  a.cfg.connectivity = s2m::connectivity_from_int(a.connectivity);
  const auto boxes = s2m::generate_prompts(scores, a.cfg);
  s2m::write_prompts({scores.width(), scores.height(), boxes}, a.out);
  std::cout << boxes.size() << " prompt(s) written to " << a.out << '\n';
  return 0;
}

struct SegmentArgs {
  std::string scores, boxes, out, mask_out, external_masks, confidences;
  s2m::SegmenterConfig cfg;
};

int run_segment(const SegmentArgs& a) {
  const auto scores = s2m::read_scoremap(a.scores);
  std::vector<s2m::PromptMask> masks;
  if (!a.external_masks.empty()) {
    std::optional<fs::path> conf;
    if (!a.confidences.empty()) conf = a.confidences;
    masks = s2m::read_mask_dir(a.external_masks, scores.width(), scores.height(), conf);
  } else {
    if (a.boxes.empty()) throw s2m::Error("segment needs --boxes or --external-masks");
    const auto set = s2m::read_prompts(a.boxes);
    if (set.width != scores.width() || set.height != scores.height()) {
      throw s2m::Error(a.boxes + ": prompt frame differs from the score map size");
    }
    const s2m::NormalizedScores normalized(scores);
    for (const auto& box : set.boxes) masks.push_back(s2m::segment_with_box(normalized, box, a.cfg));
  }
  const auto confidence = s2m::fuse_masks(masks, scores.width(), scores.height());
  s2m::write_confidence_map(confidence, a.out);
  if (!a.mask_out.empty()) s2m::write_binarymask(s2m::binarize_confidence(confidence), a.mask_out);
  if (masks.empty()) std::cerr << "warning: no prompts; confidence map is all zero\n";
  return 0;
}

struct EvalArgs {
  std::string pred_dir, gt_dir, report, csv, curves, range = "dataset", agg = "pool";
  int steps = 100;
  int workers = 0;
};

int run_eval(const EvalArgs& a) {
  const s2m::SweepConfig sweep{a.steps, s2m::range_mode_from_string(a.range)};
  const auto report =
      s2m::evaluate_directory(a.pred_dir, a.gt_dir, sweep, s2m::aggregation_from_string(a.agg), a.workers);
  s2m::write_json(s2m::report_to_json(report), a.report);
  if (!a.csv.empty()) s2m::write_metrics_csv(report, a.csv);
  if (!a.curves.empty()) s2m::emit_curves(report, a.curves);
  std::cout << "best IoU " << report.best_iou << "  AuIoU " << report.auiou << "  mean F1 " << report.mean_f1
            << "  (" << report.n_images << " images)\n";
  return 0;
}

struct SynthArgs {
  std::string inlier_dir, object_dir, out;
  std::uint64_t count = 0;
  s2m::SynthConfig cfg;
  int connectivity = 8;
  int workers = 0;
};

std::vector<s2m::RgbImage> load_inliers(const fs::path& dir) {
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".png" || ext == ".ppm")) paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<s2m::RgbImage> out;
  for (const auto& p : paths) out.push_back(s2m::read_image(p));
  return out;
}

// Objects are <stem>.png crops paired with <stem>_mask.png masks.
std::vector<s2m::OutlierObject> load_objects(const fs::path& dir) {
  std::vector<fs::path> crops;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto stem = e.path().stem().string();
    if (e.is_regular_file() && e.path().extension() == ".png" && !stem.ends_with("_mask")) crops.push_back(e.path());
  }
  std::sort(crops.begin(), crops.end());
  std::vector<s2m::OutlierObject> out;
  for (const auto& crop : crops) {
    const auto mask = crop.parent_path() / (crop.stem().string() + "_mask.png");
    if (!fs::exists(mask)) throw s2m::Error(crop.string() + ": missing mask " + mask.filename().string());
    try {
      out.emplace_back(s2m::read_image(crop), s2m::read_binarymask(mask));
    } catch (const s2m::Error& e) {
      throw s2m::Error(crop.string() + ": " + e.what());
    }
  }
  return out;
}

int run_synth(const SynthArgs& a) {
  const auto inliers = load_inliers(a.inlier_dir);
  const auto objects = load_objects(a.object_dir);
  if (inliers.empty()) throw s2m::Error(a.inlier_dir + ": no inlier images");
  if (objects.empty()) throw s2m::Error(a.object_dir + ": no outlier objects");
  fs::create_directories(a.out);
  const auto connectivity = s2m::connectivity_from_int(a.connectivity);
  s2m::parallel_for(a.count, a.workers, [&](std::size_t i) {
    const auto sample = s2m::synthesize(inliers, objects, a.cfg, i, connectivity);
    const fs::path out(a.out);
    s2m::write_image(sample.image, out / numbered("img", i, ".png"));
    s2m::write_labelmask(sample.label, out / numbered("gt", i, ".png"));
    s2m::write_prompts({sample.image.width(), sample.image.height(), sample.boxes},
                       out / numbered("boxes", i, ".json"));
  });
  std::cout << a.count << " composite(s) written to " << a.out << '\n';
  return 0;
}

struct DemoArgs {
  std::string out;
  std::uint64_t count = 20;
  s2m::SceneConfig cfg;
};

int run_demo(const DemoArgs& a) {
  const fs::path out(a.out);
  for (const char* sub : {"images", "gt", "scores"}) fs::create_directories(out / sub);
  s2m::parallel_for(a.count, 0, [&](std::size_t i) {
    const auto scene = s2m::make_scene(a.cfg, i);
    s2m::write_image(scene.image, out / "images" / numbered("img", i, ".png"));
    s2m::write_labelmask(scene.label, out / "gt" / numbered("gt", i, ".png"));
    s2m::write_scoremap(scene.scores, out / "scores" / numbered("img", i, ".npy"));
  });
  std::cout << a.count << " scene(s) written to " << a.out << '\n';
  return 0;
}

struct PipelineArgs {
  s2m::PipelinePaths paths;
  std::string boxes_dir, masks_dir, viz_dir, config, report, manifest, curves_dir;
};

int run_pipeline(PipelineArgs a) {
  s2m::PipelineConfig cfg = a.config.empty() ? s2m::PipelineConfig{} : s2m::load_config(a.config);
  if (!a.boxes_dir.empty() && !a.masks_dir.empty()) throw s2m::Error("--boxes-dir and --masks-dir are exclusive");
  if (!a.boxes_dir.empty()) {
    a.paths.boxes_dir = a.boxes_dir;
    cfg.source = s2m::PromptSource::ExternalPrompts;
  }
  if (!a.masks_dir.empty()) {
    a.paths.masks_dir = a.masks_dir;
    cfg.source = s2m::PromptSource::ExternalMasks;
  }
  if (!a.viz_dir.empty()) a.paths.viz_dir = a.viz_dir;
  const auto result = s2m::run_pipeline(a.paths, cfg);
  s2m::write_json(s2m::report_to_json(result.report), a.report);
  if (!a.manifest.empty()) s2m::write_json(s2m::manifest_to_json(result.manifest), a.manifest);
  if (!a.curves_dir.empty()) s2m::emit_curves(result.report, a.curves_dir);
  const auto timing = s2m::time_run(result.manifest);
  std::cout << "threshold-free IoU " << result.report.threshold_free_iou.value_or(0.0) << "  AuIoU "
            << result.report.auiou << "  mean F1 " << result.report.mean_f1 << "  (" << result.report.n_images
            << " images, " << timing.mean_ms << " ms/image)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-to-mask toolkit: anomaly scores to box prompts to whole-object masks, plus evaluation."};
  app.require_subcommand(1);
  app.set_version_flag("--version", s2m::kVersion);

  ScoreArgs score;
  auto* cmd_score = app.add_subcommand("score", "Anomaly scores from exported logits (C,H,W NPY)");
  cmd_score->add_option("--logits", score.logits, "Logit stack (.npy)")->required();
  cmd_score->add_option("--method", score.method, "entropy or energy")
      ->check(CLI::IsMember({"entropy", "energy"}))
      ->capture_default_str();
  cmd_score->add_option("--temperature", score.temperature, "Energy temperature")->capture_default_str();
  cmd_score->add_flag("--literal-energy", score.literal, "Energy without the logarithm");
  cmd_score->add_option("--scale", score.scale, "Multiply scores by this factor");
  cmd_score->add_option("--out", score.out, "Output score map (.npy or .pfm)")->required();

  PromptArgs prompts;
  auto* cmd_prompts = app.add_subcommand("prompts", "Reference box prompts from a score map");
  cmd_prompts->add_option("--scores", prompts.scores, "Score map (.npy or .pfm)")->required();
  cmd_prompts->add_option("--quantile", prompts.cfg.quantile)->capture_default_str();
  cmd_prompts->add_option("--min-area", prompts.cfg.min_area)->capture_default_str();
  cmd_prompts->add_option("--merge-iou", prompts.cfg.merge_iou)->capture_default_str();
  cmd_prompts->add_option("--connectivity", prompts.connectivity)->capture_default_str();
  cmd_prompts->add_option("--noise", prompts.noise, "Multiplicative score fluctuation amplitude")
      ->capture_default_str();
  cmd_prompts->add_option("--seed", prompts.seed)->capture_default_str();
  cmd_prompts->add_option("--out", prompts.out, "Prompt JSON")->required();

  SegmentArgs segment;
  auto* cmd_segment = app.add_subcommand("segment", "Masks per prompt, fused into a confidence map");
  cmd_segment->add_option("--scores", segment.scores, "Score map (.npy or .pfm)")->required();
  cmd_segment->add_option("--boxes", segment.boxes, "Prompt JSON");
  cmd_segment->add_option("--alpha", segment.cfg.alpha)->capture_default_str();
  cmd_segment->add_option("--margin", segment.cfg.margin)->capture_default_str();
  cmd_segment->add_option("--external-masks", segment.external_masks, "Directory of mask PNGs");
  cmd_segment->add_option("--confidences", segment.confidences, "Confidence JSON for the external masks");
  cmd_segment->add_option("--out", segment.out, "Confidence map (.npy)")->required();
  cmd_segment->add_option("--mask-out", segment.mask_out, "Threshold-free binary mask (.png)");

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand(
      "eval", "Evaluate prediction maps against labels; files pair by the stem part after the first '_'");
  cmd_eval->add_option("--pred-dir", eval.pred_dir)->required();
  cmd_eval->add_option("--gt-dir", eval.gt_dir)->required();
  cmd_eval->add_option("--steps", eval.steps)->capture_default_str();
  cmd_eval->add_option("--range", eval.range, "dataset, image or unit")->capture_default_str();
  cmd_eval->add_option("--agg", eval.agg, "pool or mean")->capture_default_str();
  cmd_eval->add_option("--workers", eval.workers, "0 = all hardware threads")->capture_default_str();
  cmd_eval->add_option("--report", eval.report, "Report JSON")->required();
  cmd_eval->add_option("--csv", eval.csv, "Per-image metrics CSV");
  cmd_eval->add_option("--curves", eval.curves, "Directory for curve.csv and histogram.csv");

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Outlier-exposure composites (img_/gt_/boxes_%06d)");
  cmd_synth->add_option("--inlier-dir", synth.inlier_dir, "Inlier RGB PNGs")->required();
  cmd_synth->add_option("--object-dir", synth.object_dir, "<stem>.png crops with <stem>_mask.png")->required();
  cmd_synth->add_option("--out", synth.out)->required();
  cmd_synth->add_option("--count", synth.count)->required();
  cmd_synth->add_option("--seed", synth.cfg.seed)->required();
  cmd_synth->add_option("--objects-per-image", synth.cfg.objects_per_image)->capture_default_str();
  cmd_synth->add_option("--scale-min", synth.cfg.scale_min)->capture_default_str();
  cmd_synth->add_option("--scale-max", synth.cfg.scale_max)->capture_default_str();
  cmd_synth->add_option("--connectivity", synth.connectivity)->capture_default_str();
  cmd_synth->add_option("--workers", synth.workers)->capture_default_str();

  DemoArgs demo;
  auto* cmd_demo = app.add_subcommand("demo", "Procedural scenes with score maps (images/, gt/, scores/)");
  cmd_demo->add_option("--out", demo.out)->required();
  cmd_demo->add_option("--count", demo.count)->capture_default_str();
  cmd_demo->add_option("--seed", demo.cfg.synth.seed)->capture_default_str();
  cmd_demo->add_option("--width", demo.cfg.width)->capture_default_str();
  cmd_demo->add_option("--height", demo.cfg.height)->capture_default_str();
  cmd_demo->add_option("--noise-sigma", demo.cfg.noise_sigma, "Gaussian noise added to the scores")
      ->capture_default_str();

  PipelineArgs pipeline;
  auto* cmd_pipeline = app.add_subcommand("pipeline", "Full pipeline over a dataset directory");
  cmd_pipeline->add_option("--scores-dir", pipeline.paths.scores_dir)->required();
  cmd_pipeline->add_option("--gt-dir", pipeline.paths.gt_dir)->required();
  cmd_pipeline->add_option("--boxes-dir", pipeline.boxes_dir, "External prompts boxes_<key>.json");
  cmd_pipeline->add_option("--masks-dir", pipeline.masks_dir, "External masks, one <prefix>_<key>/ per image");
  cmd_pipeline->add_option("--config", pipeline.config, "Flat key = value config");
  cmd_pipeline->add_option("--report", pipeline.report)->required();
  cmd_pipeline->add_option("--manifest", pipeline.manifest);
  cmd_pipeline->add_option("--viz-dir", pipeline.viz_dir);
  cmd_pipeline->add_option("--curves-dir", pipeline.curves_dir);

  std::string viz_in, viz_out;
  auto* cmd_viz = app.add_subcommand("viz", "Render a score or confidence map as 8-bit grayscale");
  cmd_viz->add_option("--map", viz_in)->required();
  cmd_viz->add_option("--out", viz_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_score->parsed()) return run_score(score);
    if (cmd_prompts->parsed()) return run_prompts(prompts);
    if (cmd_segment->parsed()) return run_segment(segment);
    if (cmd_eval->parsed()) return run_eval(eval);
    if (cmd_synth->parsed()) return run_synth(synth);
    if (cmd_demo->parsed()) return run_demo(demo);
    if (cmd_pipeline->parsed()) return run_pipeline(pipeline);
    if (cmd_viz->parsed()) {
      s2m::render_visualization(s2m::read_scoremap(viz_in), viz_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
