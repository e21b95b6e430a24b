#include "talfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "json_util.hpp"

namespace talfuse {

namespace {

// Processing order inside a group: score-descending, ties broken by
// (video_id, start, end, source_model) so runs are reproducible.
bool processing_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.video_id != b.video_id) return a.video_id < b.video_id;
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  if (a.segment.end != b.segment.end) return a.segment.end < b.segment.end;
  return a.source_model < b.source_model;
}

// NMS keep order: score-descending, ties by earlier start, then shorter
// duration, then source model.
bool suppression_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  if (a.segment.length() != b.segment.length()) return a.segment.length() < b.segment.length();
  return a.source_model < b.source_model;
}

bool output_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  if (a.segment.end != b.segment.end) return a.segment.end < b.segment.end;
  return a.label_id < b.label_id;
}

using GroupKey = std::pair<std::string, int>;

}  // namespace

Cluster::Cluster(Detection seed, double model_weight, ScoreCombine combine) : combine_(combine) {
  add(std::move(seed), model_weight);
}

void Cluster::add(Detection det, double model_weight) {
  const double effective = model_weight * det.score;
  weighted_start_ += effective * det.segment.start;
  weighted_end_ += effective * det.segment.end;
  effective_sum_ += effective;
  plain_start_ += model_weight * det.segment.start;
  plain_end_ += model_weight * det.segment.end;
  weight_sum_ += model_weight;
  score_sum_ += det.score;
  score_max_ = std::max(score_max_, det.score);
  members_.push_back(ClusterMember{std::move(det), model_weight});
  refresh();
}

void Cluster::refresh() {
  if (members_.size() == 1) {
    fused_ = members_.front().det;  // exact identity for singletons
    return;
  }
  fused_ = members_.front().det;
  if (effective_sum_ > 0.0) {
    fused_.segment = Segment{weighted_start_ / effective_sum_, weighted_end_ / effective_sum_};
  } else {
    // All member scores are zero; fall back to the model-weight average.
    fused_.segment = Segment{plain_start_ / weight_sum_, plain_end_ / weight_sum_};
  }
  switch (combine_) {
    case ScoreCombine::WeightedMean:
      fused_.score = effective_sum_ / weight_sum_;
      break;
    case ScoreCombine::Mean:
      fused_.score = score_sum_ / static_cast<double>(members_.size());
      break;
    case ScoreCombine::Max:
      fused_.score = score_max_;
      break;
  }
}

std::optional<std::size_t> cluster_assign(const Detection& d, std::span<const Cluster> clusters,
                                          double iou_threshold) {
  std::optional<std::size_t> best;
  double best_iou = iou_threshold;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const double overlap = tiou(d.segment, clusters[i].fused().segment);
    if (overlap > best_iou) {  // strict: ties below stay with the lower index
      best_iou = overlap;
      best = i;
    }
  }
  return best;
}

Detection fuse_cluster(std::span<const ClusterMember> members, ScoreCombine combine) {
  if (members.empty()) {
    throw ConfigError("cannot fuse an empty cluster");
  }
  if (members.size() == 1) {
    return members.front().det;
  }
  double weighted_start = 0.0, weighted_end = 0.0, effective_sum = 0.0;
  double plain_start = 0.0, plain_end = 0.0, weight_sum = 0.0;
  double score_sum = 0.0, score_max = 0.0;
  for (const auto& m : members) {
    const double effective = m.model_weight * m.det.score;
    weighted_start += effective * m.det.segment.start;
    weighted_end += effective * m.det.segment.end;
    effective_sum += effective;
    plain_start += m.model_weight * m.det.segment.start;
    plain_end += m.model_weight * m.det.segment.end;
    weight_sum += m.model_weight;
    score_sum += m.det.score;
    score_max = std::max(score_max, m.det.score);
  }
  Detection out = members.front().det;
  if (effective_sum > 0.0) {
    out.segment = Segment{weighted_start / effective_sum, weighted_end / effective_sum};
  } else {
    out.segment = Segment{plain_start / weight_sum, plain_end / weight_sum};
  }
  switch (combine) {
    case ScoreCombine::WeightedMean:
      out.score = effective_sum / weight_sum;
      break;
    case ScoreCombine::Mean:
      out.score = score_sum / static_cast<double>(members.size());
      break;
    case ScoreCombine::Max:
      out.score = score_max;
      break;
  }
  return out;
}

double rescale_confidence(double raw_score, double cluster_weight_sum, double total_model_weight,
                          RescaleMode mode) {
  if (!(cluster_weight_sum > 0.0) || !(total_model_weight > 0.0)) {
    throw ConfigError("weight sums must be positive");
  }
  double s = raw_score;
  switch (mode) {
    case RescaleMode::MinClamp:
      s = raw_score * std::min(cluster_weight_sum, total_model_weight) / total_model_weight;
      break;
    case RescaleMode::Ratio:
      s = raw_score * cluster_weight_sum / total_model_weight;
      break;
    case RescaleMode::None:
      break;
  }
  return std::clamp(s, 0.0, 1.0);
}

PredictionSet wbf_fuse(std::span<const PredictionSet> inputs, const FusionConfig& config,
                       FusionStats* stats) {
  if (inputs.empty()) {
    throw ConfigError("no prediction sets to fuse");
  }
  if (!(config.iou_threshold > 0.0 && config.iou_threshold < 1.0)) {
    throw ConfigError("iou_threshold must be in (0,1)");
  }
  std::vector<double> weights = config.model_weights;
  if (weights.empty()) {
    weights.reserve(inputs.size());
    for (const auto& set : inputs) weights.push_back(set.model_weight);
  } else if (weights.size() != inputs.size()) {
    throw ConfigError("got " + std::to_string(weights.size()) + " model weights for " +
                      std::to_string(inputs.size()) + " prediction sets");
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw ConfigError("model weights must be positive");
    }
  }
  // summed in sorted order so the total is invariant under input permutation
  std::vector<double> sorted_weights = weights;
  std::sort(sorted_weights.begin(), sorted_weights.end());
  double total_weight = 0.0;
  for (double w : sorted_weights) total_weight += w;

  FusionStats st;
  std::map<GroupKey, std::vector<ClusterMember>> groups;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (const auto& [video_id, dets] : inputs[i].results) {
      for (const Detection& d : dets) {
        ++st.input_detections;
        if (d.score < config.skip_threshold) {
          ++st.skipped;
          continue;
        }
        Detection c = d;
        c.source_model = static_cast<int>(i);
        groups[GroupKey{video_id, d.label_id}].push_back(ClusterMember{std::move(c), weights[i]});
      }
    }
  }

  PredictionSet out;
  out.model_name = "wbf_fused";
  out.model_weight = 1.0;
  for (auto& [key, candidates] : groups) {
    ++st.groups;
    std::sort(candidates.begin(), candidates.end(),
              [](const ClusterMember& a, const ClusterMember& b) {
                return processing_before(a.det, b.det);
              });
    std::vector<Cluster> clusters;
    for (auto& cand : candidates) {
      if (auto j = cluster_assign(cand.det, clusters, config.iou_threshold)) {
        clusters[*j].add(std::move(cand.det), cand.model_weight);
      } else {
        clusters.emplace_back(std::move(cand.det), cand.model_weight, config.score_combine);
      }
    }
    auto& sink = out.results[key.first];
    for (const auto& cl : clusters) {
      ++st.clusters;
      Detection fused = cl.fused();
      fused.score =
          rescale_confidence(fused.score, cl.weight_sum(), total_weight, config.rescale_mode);
      sink.push_back(std::move(fused));
    }
  }
  for (auto& [video_id, dets] : out.results) {
    std::sort(dets.begin(), dets.end(), output_before);
  }
  if (stats != nullptr) {
    *stats = st;
  }
  return out;
}

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
  std::map<GroupKey, std::vector<Detection>> groups;
  for (auto& d : detections) {
    auto key = GroupKey{d.video_id, d.label_id};
    groups[std::move(key)].push_back(std::move(d));
  }
  std::vector<Detection> out;
  out.reserve(detections.size());
  for (auto& [key, group] : groups) {
    std::sort(group.begin(), group.end(), suppression_before);
    std::vector<bool> removed(group.size(), false);
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (removed[i]) continue;
      for (std::size_t j = i + 1; j < group.size(); ++j) {
        if (!removed[j] && tiou(group[i].segment, group[j].segment) >= iou_threshold) {
          removed[j] = true;
        }
      }
      out.push_back(std::move(group[i]));
    }
  }
  return out;
}

std::vector<Detection> soft_nms(std::vector<Detection> detections, double iou_threshold,
                                double sigma, SoftNmsMethod method) {
  if (!(sigma > 0.0)) {
    throw ConfigError("soft-nms sigma must be positive");
  }
  std::map<GroupKey, std::vector<Detection>> groups;
  for (auto& d : detections) {
    auto key = GroupKey{d.video_id, d.label_id};
    groups[std::move(key)].push_back(std::move(d));
  }
  std::vector<Detection> out;
  out.reserve(detections.size());
  for (auto& [key, group] : groups) {
    while (!group.empty()) {
      auto it = std::min_element(group.begin(), group.end(), suppression_before);
      Detection keeper = std::move(*it);
      group.erase(it);
      for (auto& other : group) {
        const double overlap = tiou(keeper.segment, other.segment);
        double factor = 1.0;
        if (method == SoftNmsMethod::Linear) {
          if (overlap > iou_threshold) factor = 1.0 - overlap;
        } else {
          factor = std::exp(-(overlap * overlap) / sigma);
        }
        other.score *= factor;
      }
      out.push_back(std::move(keeper));
    }
  }
  return out;
}

namespace {

std::vector<Detection> pool_inputs(std::span<const PredictionSet> inputs) {
  if (inputs.empty()) {
    throw ConfigError("no prediction sets to pool");
  }
  std::vector<Detection> all;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (const auto& [video_id, dets] : inputs[i].results) {
      for (Detection d : dets) {
        d.source_model = static_cast<int>(i);
        all.push_back(std::move(d));
      }
    }
  }
  return all;
}

PredictionSet collect(std::vector<Detection> dets, std::string name) {
  PredictionSet out;
  out.model_name = std::move(name);
  out.model_weight = 1.0;
  for (auto& d : dets) {
    auto& sink = out.results[d.video_id];
    sink.push_back(std::move(d));
  }
  for (auto& [video_id, list] : out.results) {
    std::sort(list.begin(), list.end(), output_before);
  }
  return out;
}

}  // namespace

PredictionSet nms_pool(std::span<const PredictionSet> inputs, double iou_threshold) {
  return collect(nms(pool_inputs(inputs), iou_threshold), "nms_pooled");
}

PredictionSet soft_nms_pool(std::span<const PredictionSet> inputs, double iou_threshold,
                            double sigma, SoftNmsMethod method) {
  return collect(soft_nms(pool_inputs(inputs), iou_threshold, sigma, method), "soft_nms_pooled");
}

FusionConfig fusion_config_from_json(std::string_view bytes) {
  const auto j = detail::parse_json(bytes, "fusion config");
  if (!j.is_object()) {
    throw SchemaError("fusion config: expected a JSON object");
  }
  FusionConfig cfg;
  if (auto it = j.find("iou_threshold"); it != j.end()) {
    if (!it->is_number()) throw SchemaError("fusion config: iou_threshold must be a number");
    cfg.iou_threshold = it->get<double>();
  }
  if (auto it = j.find("skip_threshold"); it != j.end()) {
    if (!it->is_number()) throw SchemaError("fusion config: skip_threshold must be a number");
    cfg.skip_threshold = it->get<double>();
  }
  if (auto it = j.find("rescale_mode"); it != j.end()) {
    const std::string v = it->is_string() ? it->get<std::string>() : "";
    if (v == "min_clamp" || v == "min") {
      cfg.rescale_mode = RescaleMode::MinClamp;
    } else if (v == "ratio") {
      cfg.rescale_mode = RescaleMode::Ratio;
    } else if (v == "none") {
      cfg.rescale_mode = RescaleMode::None;
    } else {
      throw SchemaError("fusion config: unknown rescale_mode \"" + v + "\"");
    }
  }
  if (auto it = j.find("score_combine"); it != j.end()) {
    const std::string v = it->is_string() ? it->get<std::string>() : "";
    if (v == "weighted_mean" || v == "wmean") {
      cfg.score_combine = ScoreCombine::WeightedMean;
    } else if (v == "mean") {
      cfg.score_combine = ScoreCombine::Mean;
    } else if (v == "max") {
      cfg.score_combine = ScoreCombine::Max;
    } else {
      throw SchemaError("fusion config: unknown score_combine \"" + v + "\"");
    }
  }
  if (auto it = j.find("model_weights"); it != j.end()) {
    if (!it->is_array()) throw SchemaError("fusion config: model_weights must be an array");
    cfg.model_weights.clear();
    for (const auto& w : *it) {
      if (!w.is_number()) throw SchemaError("fusion config: model_weights must be numbers");
      cfg.model_weights.push_back(w.get<double>());
    }
  }
  return cfg;
}

}  // namespace talfuse
