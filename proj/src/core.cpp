#include "talfuse/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace talfuse {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  const auto dot = s.find('.');
  if (dot != std::string::npos) {
    auto last = s.find_last_not_of('0');
    if (s[last] == '.') --last;
    s.erase(last + 1);
  }
  if (s == "-0") {
    s = "0";
  }
  return s;
}

double tiou(const Segment& a, const Segment& b) {
  const double inter = std::min(a.end, b.end) - std::max(a.start, b.start);
  if (inter <= 0.0) {
    return 0.0;
  }
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

namespace {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string LabelSpace::canonical(std::string_view name) {
  std::size_t begin = 0;
  std::size_t end = name.size();
  while (begin < end && is_ascii_space(name[begin])) ++begin;
  while (end > begin && is_ascii_space(name[end - 1])) --end;
  std::string out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    char c = name[i];
    if (c >= 'A' && c <= 'Z') {
      c = static_cast<char>(c - 'A' + 'a');
    }
    out.push_back(c);
  }
  return out;
}

LabelSpace::LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
  index_.reserve(names_.size());
  for (std::size_t i = 0; i < names_.size(); ++i) {
    auto [it, inserted] = index_.emplace(canonical(names_[i]), static_cast<int>(i));
    if (!inserted) {
      throw ValidationError("duplicate label name \"" + names_[i] + "\"");
    }
  }
}

const std::string& LabelSpace::name(int label_id) const {
  if (!contains(label_id)) {
    throw ValidationError("label id " + std::to_string(label_id) + " out of range");
  }
  return names_[static_cast<std::size_t>(label_id)];
}

std::optional<int> LabelSpace::find(std::string_view name) const {
  auto it = index_.find(canonical(name));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::size_t GroundTruthSet::instance_count() const {
  std::size_t n = 0;
  for (const auto& [id, video] : videos) {
    n += video.instances.size();
  }
  return n;
}

std::size_t PredictionSet::detection_count() const {
  std::size_t n = 0;
  for (const auto& [id, dets] : results) {
    n += dets.size();
  }
  return n;
}

std::optional<std::string> validate_segment(const Segment& s) {
  if (!std::isfinite(s.start) || !std::isfinite(s.end)) {
    return "non-finite segment endpoint";
  }
  if (s.start < 0.0) {
    return "negative segment start";
  }
  if (s.start == s.end) {
    return "zero-duration segment";
  }
  if (s.start > s.end) {
    return "segment start exceeds its end";
  }
  return std::nullopt;
}

std::optional<std::string> validate_detection(const Detection& d, const LabelSpace& space) {
  if (auto v = validate_segment(d.segment)) {
    return v;
  }
  if (!std::isfinite(d.score) || d.score < 0.0 || d.score > 1.0) {
    return "score out of range [0,1]";
  }
  if (!space.contains(d.label_id)) {
    return "unknown label id " + std::to_string(d.label_id);
  }
  return std::nullopt;
}

std::optional<std::string> validate_ground_truth(const GroundTruthSet& gt) {
  for (const auto& [video_id, video] : gt.videos) {
    if (!std::isfinite(video.duration) || video.duration <= 0.0) {
      return "video \"" + video_id + "\": non-positive duration";
    }
    for (std::size_t i = 0; i < video.instances.size(); ++i) {
      const auto& inst = video.instances[i];
      const std::string where = "video \"" + video_id + "\" annotation " + std::to_string(i);
      if (inst.video_id != video_id) {
        return where + ": video id mismatch";
      }
      if (auto v = validate_segment(inst.segment)) {
        return where + ": " + *v;
      }
      if (inst.segment.end > video.duration) {
        return where + ": segment outside video duration";
      }
      if (!gt.label_space.contains(inst.label_id)) {
        return where + ": unknown label id " + std::to_string(inst.label_id);
      }
    }
  }
  return std::nullopt;
}

std::optional<std::string> validate_predictions(const PredictionSet& p, const LabelSpace& space) {
  if (!std::isfinite(p.model_weight) || p.model_weight <= 0.0) {
    return "model weight must be positive";
  }
  for (const auto& [video_id, dets] : p.results) {
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const auto& d = dets[i];
      if (d.video_id != video_id) {
        return "video \"" + video_id + "\" detection " + std::to_string(i) + ": video id mismatch";
      }
      if (auto v = validate_detection(d, space)) {
        return "video \"" + video_id + "\" detection " + std::to_string(i) + ": " + *v;
      }
    }
  }
  return std::nullopt;
}

}  // namespace talfuse
