#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "talfuse/core.hpp"

namespace talfuse {

enum class UnknownVideoPolicy { Error, Drop };

struct EvalConfig {
  // Strictly increasing, all in (0,1].
  std::vector<double> tiou_thresholds = {0.1, 0.2, 0.3, 0.4, 0.5};
  // Per-video cap across classes, applied score-descending. Unset = unlimited.
  std::optional<int> max_detections_per_video;
  double min_score = 0.0;
  // Detections for videos absent from the ground truth: hard error or drop.
  UnknownVideoPolicy unknown_video = UnknownVideoPolicy::Error;
};

EvalConfig eval_config_from_json(std::string_view bytes);

struct EvalCounts {
  int num_videos = 0;
  int num_gt_instances = 0;
  int num_detections = 0;      // after min_score filtering and truncation
  int detections_dropped = 0;  // unknown-video drops under the Drop policy
  std::map<int, int> gt_per_class;
  std::map<int, int> detections_per_class;
  std::vector<int> classes_without_gt;  // excluded from all means
};

struct EvalReport {
  std::vector<double> thresholds;
  // label_id -> AP per threshold (aligned with `thresholds`); only classes
  // with at least one GT instance appear.
  std::map<int, std::vector<double>> per_class_ap;
  std::vector<double> map_per_threshold;  // unweighted mean over evaluated classes
  double avg_map = 0.0;                   // unweighted mean over thresholds
  EvalCounts counts;
};

struct MatchedDetection {
  Detection detection;
  bool is_tp = false;
};

struct MatchResult {
  std::vector<MatchedDetection> matches;  // global score-descending order
  int num_gt = 0;
};

// Greedy matching for one class: detections in global score-descending order
// (ties by video_id, start, end) each take the unmatched same-video GT with
// the highest tIoU, provided it reaches the threshold. Each GT is consumed
// at most once.
MatchResult match_detections(std::vector<Detection> preds,
                             const std::vector<GroundTruthInstance>& gts, double tiou_threshold);

// All-points interpolated AP: precision envelope made monotone from the
// right, integrated over the equal 1/num_gt recall steps at TP positions.
// Throws ValidationError when num_gt is zero.
double average_precision(const std::vector<bool>& tp_flags, int num_gt);

EvalReport evaluate(const PredictionSet& preds, const GroundTruthSet& gt,
                    const EvalConfig& config = {});

// JSON summary of the full report; label ids resolved to names.
std::string report_to_json(const EvalReport& report, const LabelSpace& space);

// CSV rows `label,threshold,ap`, classes in label order, then per-threshold
// `__mean__` rows, then a final `__mean__,avg,<avg_map>` row.
std::string report_to_csv(const EvalReport& report, const LabelSpace& space);

}  // namespace talfuse
