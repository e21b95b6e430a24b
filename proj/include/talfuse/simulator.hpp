#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "talfuse/core.hpp"
#include "talfuse/eval.hpp"
#include "talfuse/fusion.hpp"

namespace talfuse {

// Seeded generator of synthetic ground truth plus per-model noisy prediction
// sets. Everything is a pure function of (config, seed): engines are
// MT19937-64 seeded per video via derive_stream (see rng.hpp), so results do
// not depend on iteration or scheduling order.
//
// Stream layout: ground-truth video v uses derive_stream(seed, 1, v);
// perturbation of video v uses derive_stream(seed, 2, v); the experiment
// derives model i's seed as derive_stream(config.seed, 3, i).

struct ScoreModel {
  double tp_score_mean = 0.75;  // detections of real actions
  double fp_score_mean = 0.35;  // spurious detections
  double score_sigma = 0.1;     // shared Gaussian sigma, clamped to [0,1]
};

struct ModelNoiseProfile {
  std::string name = "model";
  double boundary_jitter_sigma = 0.0;  // seconds, independent per endpoint
  double miss_rate = 0.0;              // probability a GT action is not detected
  double false_positive_rate = 0.0;    // expected spurious detections per video
  double label_confusion_rate = 0.0;   // probability a detection gets a wrong label
  ScoreModel score_model;
};

struct SimConfig {
  std::uint64_t seed = 42;
  int num_videos = 0;
  int num_classes = 1;
  double video_duration = 0.0;  // seconds, shared by all videos
  std::pair<int, int> actions_per_video{0, 0};
  std::pair<double, double> action_duration{0.0, 0.0};  // seconds
  std::vector<ModelNoiseProfile> models;

  // Two models with distinct noise profiles, a stronger "multimodal" and a
  // weaker "unimodal" one, sized so individual scores land in a realistic
  // mid-range band.
  static SimConfig default_two_model(std::uint64_t seed = 42);
};

SimConfig sim_config_from_json(std::string_view bytes);

// Uniform action counts, durations and placement per video; segments may
// overlap. Video ids are "sim_000000", ... Throws ConfigError when the
// config is invalid or infeasible (min action duration > video duration).
GroundTruthSet generate_ground_truth(const SimConfig& config);

// Noisy view of the ground truth: misses, endpoint jitter (clamped to the
// video and to a 0.1 s minimum duration), label confusion, clamped Gaussian
// scores, plus Poisson spurious detections with durations drawn from
// fp_duration_range (pass the generator's action_duration for matched-
// difficulty negatives).
PredictionSet perturb_model(const GroundTruthSet& gt, const ModelNoiseProfile& profile,
                            std::uint64_t seed, std::pair<double, double> fp_duration_range);

struct ExperimentReport {
  std::vector<std::pair<std::string, double>> per_model_avg_map;
  double best_individual = 0.0;
  double wbf_avg_map = 0.0;
  double nms_avg_map = 0.0;
  double soft_nms_avg_map = 0.0;
  // Deltas against the best individual model (positive = fusion helped).
  double wbf_delta = 0.0;
  double nms_delta = 0.0;
  double soft_nms_delta = 0.0;
};

// Generates GT, perturbs one prediction set per model, evaluates each model
// and the WBF / pooled-NMS / pooled-Soft-NMS fusions against the same GT.
// Requires at least two models.
ExperimentReport run_ensemble_experiment(const SimConfig& config, const FusionConfig& fusion,
                                         const EvalConfig& eval_cfg);

std::string experiment_report_to_json(const ExperimentReport& report);

// Human-readable table; scores shown as percentages.
std::string experiment_report_table(const ExperimentReport& report);

}  // namespace talfuse
