#pragma once

// Shared builders and random-instance generators for the test suites.
// Generators run on talfuse::Rng so expected values are stable everywhere.

#include <string>
#include <utility>
#include <vector>

#include "reference_map.hpp"
#include "talfuse/core.hpp"
#include "talfuse/rng.hpp"

namespace talfuse::testutil {

inline GroundTruthSet make_gt(
    std::vector<std::string> labels,
    const std::vector<std::tuple<std::string, double, std::vector<std::tuple<int, double, double>>>>&
        videos) {
  GroundTruthSet gt;
  gt.label_space = LabelSpace(std::move(labels));
  for (const auto& [id, duration, instances] : videos) {
    VideoAnnotations video;
    video.duration = duration;
    for (const auto& [label, start, end] : instances) {
      video.instances.push_back(GroundTruthInstance{id, label, Segment{start, end}});
    }
    gt.videos.emplace(id, std::move(video));
  }
  return gt;
}

inline PredictionSet make_preds(
    std::string model_name,
    const std::vector<std::tuple<std::string, int, double, double, double>>& dets,
    double weight = 1.0) {
  PredictionSet p;
  p.model_name = std::move(model_name);
  p.model_weight = weight;
  for (const auto& [video, label, start, end, score] : dets) {
    p.results[video].push_back(Detection{video, label, Segment{start, end}, score, 0});
  }
  return p;
}

struct EvalInstance {
  GroundTruthSet gt;
  PredictionSet preds;
  int num_classes = 0;
};

// Small randomized evaluation instance: <= 5 videos, <= 3 classes,
// <= 4 GT per class, <= 8 detections in total. Scores are occasionally
// quantized so exact ties get exercised.
inline EvalInstance random_eval_instance(Rng& rng) {
  EvalInstance inst;
  const int num_videos = static_cast<int>(rng.uniform_int(1, 5));
  const int num_classes = static_cast<int>(rng.uniform_int(1, 3));
  inst.num_classes = num_classes;
  const double duration = 30.0;

  std::vector<std::string> labels;
  for (int c = 0; c < num_classes; ++c) labels.push_back("class_" + std::to_string(c));
  inst.gt.label_space = LabelSpace(labels);

  std::vector<std::string> video_ids;
  for (int v = 0; v < num_videos; ++v) {
    const std::string id = "vid_" + std::to_string(v);
    video_ids.push_back(id);
    inst.gt.videos.emplace(id, VideoAnnotations{duration, {}});
  }

  for (int c = 0; c < num_classes; ++c) {
    const auto gt_count = rng.uniform_int(0, 4);
    for (std::int64_t k = 0; k < gt_count; ++k) {
      const auto& id = video_ids[static_cast<std::size_t>(rng.uniform_int(0, num_videos - 1))];
      const double len = rng.uniform(0.5, 8.0);
      const double start = rng.uniform(0.0, duration - len);
      inst.gt.videos[id].instances.push_back(
          GroundTruthInstance{id, c, Segment{start, start + len}});
    }
  }

  inst.preds.model_name = "random";
  const auto num_dets = rng.uniform_int(0, 8);
  for (std::int64_t k = 0; k < num_dets; ++k) {
    const auto& id = video_ids[static_cast<std::size_t>(rng.uniform_int(0, num_videos - 1))];
    const int label = static_cast<int>(rng.uniform_int(0, num_classes - 1));
    Segment seg;
    // Half the detections perturb a real instance, the rest are random.
    const auto& instances = inst.gt.videos[id].instances;
    if (!instances.empty() && rng.uniform() < 0.5) {
      const auto& base =
          instances[static_cast<std::size_t>(rng.uniform_int(
              0, static_cast<std::int64_t>(instances.size()) - 1))];
      seg.start = std::clamp(base.segment.start + rng.gaussian(0.0, 1.0), 0.0, duration - 0.2);
      seg.end = std::clamp(base.segment.end + rng.gaussian(0.0, 1.0), seg.start + 0.2, duration);
    } else {
      const double len = rng.uniform(0.5, 8.0);
      seg.start = rng.uniform(0.0, duration - len);
      seg.end = seg.start + len;
    }
    double score = rng.uniform();
    if (rng.uniform() < 0.3) {
      score = std::round(score * 100.0) / 100.0;  // provoke exact score ties
    }
    inst.preds.results[id].push_back(Detection{id, label, seg, score, 0});
  }
  return inst;
}

// Random ground truth with values on the six-decimal canonical grid, so
// canonical serialization round-trips exactly.
inline GroundTruthSet random_canonical_gt(Rng& rng) {
  const int num_classes = static_cast<int>(rng.uniform_int(1, 4));
  std::vector<std::string> labels;
  for (int c = 0; c < num_classes; ++c) labels.push_back("label " + std::to_string(c));
  GroundTruthSet gt;
  gt.label_space = LabelSpace(labels);
  const int num_videos = static_cast<int>(rng.uniform_int(1, 4));
  for (int v = 0; v < num_videos; ++v) {
    const std::string id = "video-" + std::to_string(v);
    VideoAnnotations video;
    video.duration = static_cast<double>(rng.uniform_int(20, 40));
    const auto n = rng.uniform_int(0, 5);
    for (std::int64_t k = 0; k < n; ++k) {
      const double start = static_cast<double>(rng.uniform_int(0, 15000)) / 1000.0;
      const double len = static_cast<double>(rng.uniform_int(100, 4000)) / 1000.0;
      const double end = std::min(start + len, video.duration);
      video.instances.push_back(GroundTruthInstance{
          id, static_cast<int>(rng.uniform_int(0, num_classes - 1)), Segment{start, end}});
    }
    gt.videos.emplace(id, std::move(video));
  }
  return gt;
}

inline PredictionSet random_canonical_preds(Rng& rng, const GroundTruthSet& gt) {
  PredictionSet p;
  p.model_name = "model-" + std::to_string(rng.uniform_int(0, 9));
  p.model_weight = static_cast<double>(rng.uniform_int(1, 30)) / 10.0;
  for (const auto& [id, video] : gt.videos) {
    const auto n = rng.uniform_int(0, 4);
    std::vector<Detection> dets;
    for (std::int64_t k = 0; k < n; ++k) {
      const double start = static_cast<double>(rng.uniform_int(0, 15000)) / 1000.0;
      const double len = static_cast<double>(rng.uniform_int(100, 4000)) / 1000.0;
      const double end = std::min(start + len, video.duration);
      const double score = static_cast<double>(rng.uniform_int(0, 10000)) / 10000.0;
      dets.push_back(Detection{id, static_cast<int>(rng.uniform_int(0, gt.label_space.size() - 1)),
                               Segment{start, end}, score, 0});
    }
    if (!dets.empty()) p.results.emplace(id, std::move(dets));
  }
  return p;
}

inline std::vector<testref::RefInstance> to_ref_instances(const GroundTruthSet& gt) {
  std::vector<testref::RefInstance> out;
  for (const auto& [id, video] : gt.videos) {
    for (const auto& inst : video.instances) {
      out.push_back(
          testref::RefInstance{id, inst.label_id, inst.segment.start, inst.segment.end});
    }
  }
  return out;
}

inline std::vector<testref::RefDetection> to_ref_detections(const PredictionSet& preds) {
  std::vector<testref::RefDetection> out;
  for (const auto& [id, dets] : preds.results) {
    for (const auto& d : dets) {
      out.push_back(
          testref::RefDetection{id, d.label_id, d.segment.start, d.segment.end, d.score});
    }
  }
  return out;
}

}  // namespace talfuse::testutil
