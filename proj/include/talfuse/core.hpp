#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "talfuse/error.hpp"

namespace talfuse {

// Time interval in seconds. Conceptually half-open [start, end); zero-duration
// segments are invalid and rejected at parse/validation time.
struct Segment {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool operator==(const Segment&) const = default;
};

// Temporal IoU of two intervals: |intersection| / |union| on interval lengths.
// Symmetric, in [0,1]; segments that only touch at an endpoint score 0.
double tiou(const Segment& a, const Segment& b);

// A scored, labeled segment attributed to a source model.
struct Detection {
  std::string video_id;
  int label_id = 0;
  Segment segment;
  double score = 0.0;
  int source_model = 0;  // index into the fusing model list
};

struct GroundTruthInstance {
  std::string video_id;
  int label_id = 0;
  Segment segment;
};

// Ordered list of unique label names with a dense name <-> index bijection.
// Uniqueness and name lookups use canonical names: ASCII whitespace trimmed
// from both ends, ASCII letters folded to lower case, all other bytes kept
// as-is (UTF-8 passes through untouched).
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> names);  // throws ValidationError on duplicates

  static std::string canonical(std::string_view name);

  int size() const { return static_cast<int>(names_.size()); }
  bool contains(int label_id) const { return label_id >= 0 && label_id < size(); }
  const std::string& name(int label_id) const;  // throws ValidationError on a bad id
  std::optional<int> find(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const LabelSpace& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;  // canonical name -> label id
};

struct VideoAnnotations {
  double duration = 0.0;
  std::vector<GroundTruthInstance> instances;
};

// Per-video labeled segments plus the label space; the evaluation reference.
struct GroundTruthSet {
  LabelSpace label_space;
  std::map<std::string, VideoAnnotations> videos;

  std::size_t instance_count() const;
};

// One model's detections over a video collection, with a model weight
// (the per-model accuracy proxy used by fusion).
struct PredictionSet {
  std::string model_name;
  double model_weight = 1.0;
  std::map<std::string, std::vector<Detection>> results;

  std::size_t detection_count() const;
};

// Fixed-point decimal used for all canonical text output: up to six
// fractional digits, trailing zeros stripped, "-0" normalized to "0".
std::string format_number(double v);

// Invariant checkers. Each returns the first violated invariant as a short
// description, or nullopt when the value is well formed.
std::optional<std::string> validate_segment(const Segment& s);
std::optional<std::string> validate_detection(const Detection& d, const LabelSpace& space);
std::optional<std::string> validate_ground_truth(const GroundTruthSet& gt);
std::optional<std::string> validate_predictions(const PredictionSet& p, const LabelSpace& space);

}  // namespace talfuse
