#include "talfuse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "json_util.hpp"

namespace talfuse {

namespace {

// Global matching order: score-descending, ties by (video_id, start, end).
bool global_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.video_id != b.video_id) return a.video_id < b.video_id;
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  return a.segment.end < b.segment.end;
}

bool per_video_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  if (a.segment.end != b.segment.end) return a.segment.end < b.segment.end;
  return a.label_id < b.label_id;
}

void validate_config(const EvalConfig& config) {
  if (config.tiou_thresholds.empty()) {
    throw ConfigError("at least one tIoU threshold is required");
  }
  for (std::size_t i = 0; i < config.tiou_thresholds.size(); ++i) {
    const double t = config.tiou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) {
      throw ConfigError("tIoU thresholds must lie in (0,1]");
    }
    if (i > 0 && t <= config.tiou_thresholds[i - 1]) {
      throw ConfigError("tIoU thresholds must be strictly increasing");
    }
  }
  if (config.max_detections_per_video && *config.max_detections_per_video <= 0) {
    throw ConfigError("max_detections_per_video must be positive");
  }
}

}  // namespace

MatchResult match_detections(std::vector<Detection> preds,
                             const std::vector<GroundTruthInstance>& gts, double tiou_threshold) {
  std::sort(preds.begin(), preds.end(), global_before);

  std::unordered_map<std::string, std::vector<std::size_t>> gt_by_video;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    gt_by_video[gts[g].video_id].push_back(g);
  }
  std::vector<bool> taken(gts.size(), false);

  MatchResult result;
  result.num_gt = static_cast<int>(gts.size());
  result.matches.reserve(preds.size());
  for (auto& d : preds) {
    int best = -1;
    double best_iou = 0.0;
    if (auto it = gt_by_video.find(d.video_id); it != gt_by_video.end()) {
      for (std::size_t g : it->second) {
        if (taken[g]) continue;
        const double overlap = tiou(d.segment, gts[g].segment);
        if (overlap > best_iou) {  // ties keep the earliest GT
          best_iou = overlap;
          best = static_cast<int>(g);
        }
      }
    }
    const bool is_tp = best >= 0 && best_iou >= tiou_threshold;
    if (is_tp) {
      taken[static_cast<std::size_t>(best)] = true;
    }
    result.matches.push_back(MatchedDetection{std::move(d), is_tp});
  }
  return result;
}

double average_precision(const std::vector<bool>& tp_flags, int num_gt) {
  if (num_gt <= 0) {
    throw ValidationError("average precision is undefined with zero ground-truth instances");
  }
  const std::size_t n = tp_flags.size();
  if (n == 0) {
    return 0.0;
  }
  std::vector<double> precision(n);
  int tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp_flags[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    precision[i] = std::max(precision[i], precision[i + 1]);
  }
  // Every TP advances recall by exactly 1/num_gt, so the envelope integral
  // reduces to the mean interpolated precision over TP positions.
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp_flags[i]) sum += precision[i];
  }
  return sum / static_cast<double>(num_gt);
}

EvalReport evaluate(const PredictionSet& preds, const GroundTruthSet& gt,
                    const EvalConfig& config) {
  validate_config(config);
  const int num_classes = gt.label_space.size();

  EvalReport report;
  report.thresholds = config.tiou_thresholds;
  auto& counts = report.counts;
  counts.num_videos = static_cast<int>(gt.videos.size());
  for (int c = 0; c < num_classes; ++c) {
    counts.gt_per_class[c] = 0;
    counts.detections_per_class[c] = 0;
  }

  std::map<int, std::vector<GroundTruthInstance>> gts_by_class;
  for (const auto& [video_id, video] : gt.videos) {
    for (const auto& inst : video.instances) {
      gts_by_class[inst.label_id].push_back(inst);
      ++counts.gt_per_class[inst.label_id];
      ++counts.num_gt_instances;
    }
  }

  std::map<int, std::vector<Detection>> dets_by_class;
  for (const auto& [video_id, dets] : preds.results) {
    if (!gt.videos.contains(video_id)) {
      if (config.unknown_video == UnknownVideoPolicy::Error) {
        throw ValidationError("predictions reference unknown video \"" + video_id + "\"");
      }
      counts.detections_dropped += static_cast<int>(dets.size());
      continue;
    }
    std::vector<Detection> kept;
    kept.reserve(dets.size());
    for (const auto& d : dets) {
      if (!gt.label_space.contains(d.label_id)) {
        throw ValidationError("detection in video \"" + video_id + "\" has unknown label id " +
                              std::to_string(d.label_id));
      }
      if (d.score < config.min_score) continue;
      kept.push_back(d);
    }
    std::sort(kept.begin(), kept.end(), per_video_before);
    if (config.max_detections_per_video &&
        kept.size() > static_cast<std::size_t>(*config.max_detections_per_video)) {
      kept.resize(static_cast<std::size_t>(*config.max_detections_per_video));
    }
    counts.num_detections += static_cast<int>(kept.size());
    for (auto& d : kept) {
      ++counts.detections_per_class[d.label_id];
      dets_by_class[d.label_id].push_back(std::move(d));
    }
  }

  const std::size_t num_thresholds = config.tiou_thresholds.size();
  std::vector<double> map_sums(num_thresholds, 0.0);
  int evaluated_classes = 0;
  static const std::vector<Detection> kNoDetections;
  for (int c = 0; c < num_classes; ++c) {
    auto git = gts_by_class.find(c);
    if (git == gts_by_class.end()) {
      counts.classes_without_gt.push_back(c);
      continue;
    }
    ++evaluated_classes;
    auto dit = dets_by_class.find(c);
    const auto& class_dets = dit == dets_by_class.end() ? kNoDetections : dit->second;
    auto& aps = report.per_class_ap[c];
    aps.resize(num_thresholds);
    for (std::size_t t = 0; t < num_thresholds; ++t) {
      const auto matched = match_detections(class_dets, git->second, config.tiou_thresholds[t]);
      std::vector<bool> flags;
      flags.reserve(matched.matches.size());
      for (const auto& m : matched.matches) flags.push_back(m.is_tp);
      aps[t] = average_precision(flags, matched.num_gt);
      map_sums[t] += aps[t];
    }
  }

  report.map_per_threshold.resize(num_thresholds, 0.0);
  double total = 0.0;
  for (std::size_t t = 0; t < num_thresholds; ++t) {
    report.map_per_threshold[t] =
        evaluated_classes > 0 ? map_sums[t] / static_cast<double>(evaluated_classes) : 0.0;
    total += report.map_per_threshold[t];
  }
  report.avg_map = total / static_cast<double>(num_thresholds);
  return report;
}

std::string report_to_json(const EvalReport& report, const LabelSpace& space) {
  nlohmann::json j;
  j["avg_map"] = report.avg_map;
  j["thresholds"] = report.thresholds;
  j["map_per_threshold"] = report.map_per_threshold;
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [label_id, aps] : report.per_class_ap) {
    per_class[space.name(label_id)] = aps;
  }
  j["per_class_ap"] = std::move(per_class);

  nlohmann::json counts;
  counts["num_videos"] = report.counts.num_videos;
  counts["num_gt_instances"] = report.counts.num_gt_instances;
  counts["num_detections"] = report.counts.num_detections;
  counts["detections_dropped"] = report.counts.detections_dropped;
  nlohmann::json gt_per_class = nlohmann::json::object();
  for (const auto& [label_id, n] : report.counts.gt_per_class) {
    gt_per_class[space.name(label_id)] = n;
  }
  counts["gt_per_class"] = std::move(gt_per_class);
  nlohmann::json det_per_class = nlohmann::json::object();
  for (const auto& [label_id, n] : report.counts.detections_per_class) {
    det_per_class[space.name(label_id)] = n;
  }
  counts["detections_per_class"] = std::move(det_per_class);
  nlohmann::json without_gt = nlohmann::json::array();
  for (int label_id : report.counts.classes_without_gt) {
    without_gt.push_back(space.name(label_id));
  }
  counts["classes_without_gt"] = std::move(without_gt);
  j["counts"] = std::move(counts);
  return j.dump(2) + "\n";
}

namespace {

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) {
    return value;
  }
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

}  // namespace

std::string report_to_csv(const EvalReport& report, const LabelSpace& space) {
  std::string out = "label,threshold,ap\n";
  for (const auto& [label_id, aps] : report.per_class_ap) {
    for (std::size_t t = 0; t < report.thresholds.size(); ++t) {
      out += csv_field(space.name(label_id)) + "," + format_number(report.thresholds[t]) + "," +
             format_number(aps[t]) + "\n";
    }
  }
  for (std::size_t t = 0; t < report.thresholds.size(); ++t) {
    out += "__mean__," + format_number(report.thresholds[t]) + "," +
           format_number(report.map_per_threshold[t]) + "\n";
  }
  out += "__mean__,avg," + format_number(report.avg_map) + "\n";
  return out;
}

EvalConfig eval_config_from_json(std::string_view bytes) {
  const auto j = detail::parse_json(bytes, "eval config");
  if (!j.is_object()) {
    throw SchemaError("eval config: expected a JSON object");
  }
  EvalConfig cfg;
  if (auto it = j.find("tiou_thresholds"); it != j.end()) {
    if (!it->is_array()) throw SchemaError("eval config: tiou_thresholds must be an array");
    cfg.tiou_thresholds.clear();
    for (const auto& t : *it) {
      if (!t.is_number()) throw SchemaError("eval config: tiou_thresholds must be numbers");
      cfg.tiou_thresholds.push_back(t.get<double>());
    }
  }
  if (auto it = j.find("max_detections_per_video"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) {
      throw SchemaError("eval config: max_detections_per_video must be an integer");
    }
    cfg.max_detections_per_video = it->get<int>();
  }
  if (auto it = j.find("min_score"); it != j.end()) {
    if (!it->is_number()) throw SchemaError("eval config: min_score must be a number");
    cfg.min_score = it->get<double>();
  }
  if (auto it = j.find("unknown_video"); it != j.end()) {
    const std::string v = it->is_string() ? it->get<std::string>() : "";
    if (v == "error") {
      cfg.unknown_video = UnknownVideoPolicy::Error;
    } else if (v == "drop") {
      cfg.unknown_video = UnknownVideoPolicy::Drop;
    } else {
      throw SchemaError("eval config: unknown_video must be \"error\" or \"drop\"");
    }
  }
  return cfg;
}

}  // namespace talfuse
