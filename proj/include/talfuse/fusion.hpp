#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "talfuse/core.hpp"

namespace talfuse {

enum class RescaleMode { MinClamp, Ratio, None };
enum class ScoreCombine { WeightedMean, Mean, Max };
enum class SoftNmsMethod { Linear, Gaussian };

struct FusionConfig {
  // Minimum overlap (strictly greater) for a detection to join a cluster.
  double iou_threshold = 0.55;
  // Detections scoring below this never participate in fusion.
  double skip_threshold = 0.0;
  RescaleMode rescale_mode = RescaleMode::MinClamp;
  ScoreCombine score_combine = ScoreCombine::WeightedMean;
  // Per-model weights aligned with the input PredictionSets. Empty means
  // "use each set's own model_weight".
  std::vector<double> model_weights;
};

FusionConfig fusion_config_from_json(std::string_view bytes);

struct ClusterMember {
  Detection det;
  double model_weight = 1.0;
};

// A group of mutually overlapping detections plus the running fused box.
// Boundary averages weigh each member by score x model_weight; the raw
// combined score follows the configured ScoreCombine.
class Cluster {
 public:
  Cluster(Detection seed, double model_weight, ScoreCombine combine);

  void add(Detection det, double model_weight);

  const Detection& fused() const { return fused_; }
  const std::vector<ClusterMember>& members() const { return members_; }
  // T: sum of member model weights (not member count).
  double weight_sum() const { return weight_sum_; }

 private:
  void refresh();

  std::vector<ClusterMember> members_;
  ScoreCombine combine_;
  double weighted_start_ = 0.0;  // sum of w*s*start
  double weighted_end_ = 0.0;    // sum of w*s*end
  double effective_sum_ = 0.0;   // sum of w*s
  double plain_start_ = 0.0;     // sum of w*start, fallback when all scores are 0
  double plain_end_ = 0.0;       // sum of w*end
  double weight_sum_ = 0.0;      // sum of w
  double score_sum_ = 0.0;
  double score_max_ = 0.0;
  Detection fused_;
};

// Index of the cluster whose fused segment has maximal tIoU with d, provided
// that tIoU is strictly above iou_threshold; ties go to the lowest index.
std::optional<std::size_t> cluster_assign(const Detection& d, std::span<const Cluster> clusters,
                                          double iou_threshold);

// Weighted average of member boundaries (weights score x model_weight) and
// the combined raw score. A single member comes back verbatim.
Detection fuse_cluster(std::span<const ClusterMember> members,
                       ScoreCombine combine = ScoreCombine::WeightedMean);

// MIN_CLAMP: raw * min(T,N)/N; RATIO: raw * T/N; NONE: raw. Clamped to [0,1].
double rescale_confidence(double raw_score, double cluster_weight_sum, double total_model_weight,
                          RescaleMode mode);

struct FusionStats {
  std::size_t input_detections = 0;
  std::size_t skipped = 0;
  std::size_t groups = 0;
  std::size_t clusters = 0;
};

// Weighted Box Fusion over 1D segments, per (video, label) group. Output is
// one fused detection per cluster, model_name "wbf_fused", weight 1.0.
PredictionSet wbf_fuse(std::span<const PredictionSet> inputs, const FusionConfig& config,
                       FusionStats* stats = nullptr);

// Greedy NMS per (video, label) group: keep the highest-scored detection,
// suppress everything with tIoU >= threshold against it, repeat. Score ties
// break by earlier start, then shorter duration.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

// Soft-NMS: decays overlapping scores instead of suppressing. Linear decays
// s*(1-tIoU) when tIoU > iou_threshold; Gaussian decays s*exp(-tIoU^2/sigma)
// unconditionally. All detections are retained.
std::vector<Detection> soft_nms(std::vector<Detection> detections, double iou_threshold,
                                double sigma, SoftNmsMethod method);

// Pool every model's detections into one set and suppress across the pool.
// Baselines for comparing against wbf_fuse.
PredictionSet nms_pool(std::span<const PredictionSet> inputs, double iou_threshold);
PredictionSet soft_nms_pool(std::span<const PredictionSet> inputs, double iou_threshold,
                            double sigma, SoftNmsMethod method);

}  // namespace talfuse
