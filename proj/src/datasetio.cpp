#include "talfuse/datasetio.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json_util.hpp"

namespace talfuse {

namespace {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

std::string canonical_number(double v) { return format_number(round6(v)); }

void append_json_string(std::string& out, std::string_view s) {
  out += '"';
  for (unsigned char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\b':
        out += "\\b";
        break;
      case '\f':
        out += "\\f";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
}

Segment parse_segment(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw SchemaError(where + ": \"segment\" must be an array of two numbers");
  }
  return Segment{j[0].get<double>(), j[1].get<double>()};
}

void check_version(const nlohmann::json& j, const std::string& what) {
  const std::string version = detail::require_string(j, "version", what);
  if (version != "1.0") {
    throw SchemaError(what + ": unsupported version \"" + version + "\"");
  }
}

bool annotation_before(const GroundTruthInstance& a, const GroundTruthInstance& b) {
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  if (a.segment.end != b.segment.end) return a.segment.end < b.segment.end;
  return a.label_id < b.label_id;
}

bool detection_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
  if (a.segment.end != b.segment.end) return a.segment.end < b.segment.end;
  return a.label_id < b.label_id;
}

}  // namespace

GroundTruthSet load_ground_truth(std::string_view bytes) {
  const auto j = detail::parse_json(bytes, "ground truth");
  check_version(j, "ground truth");

  const auto& jlabels = detail::require_member(j, "labels", "ground truth");
  if (!jlabels.is_array()) {
    throw SchemaError("ground truth: \"labels\" must be an array");
  }
  std::vector<std::string> names;
  names.reserve(jlabels.size());
  for (const auto& n : jlabels) {
    if (!n.is_string()) {
      throw SchemaError("ground truth: label names must be strings");
    }
    names.push_back(n.get<std::string>());
  }

  GroundTruthSet gt;
  gt.label_space = LabelSpace(std::move(names));

  const auto& jvideos = detail::require_member(j, "videos", "ground truth");
  if (!jvideos.is_object()) {
    throw SchemaError("ground truth: \"videos\" must be an object");
  }
  for (const auto& [video_id, jv] : jvideos.items()) {
    const std::string vwhere = "video \"" + video_id + "\"";
    if (!jv.is_object()) {
      throw SchemaError(vwhere + ": expected an object");
    }
    VideoAnnotations video;
    video.duration = detail::require_number(jv, "duration", vwhere);
    if (!std::isfinite(video.duration) || video.duration <= 0.0) {
      throw ValidationError(vwhere + ": non-positive duration");
    }
    const auto& janns = detail::require_member(jv, "annotations", vwhere);
    if (!janns.is_array()) {
      throw SchemaError(vwhere + ": \"annotations\" must be an array");
    }
    video.instances.reserve(janns.size());
    for (std::size_t i = 0; i < janns.size(); ++i) {
      const std::string where = vwhere + " annotation " + std::to_string(i);
      const auto& ja = janns[i];
      const std::string label = detail::require_string(ja, "label", where);
      const auto label_id = gt.label_space.find(label);
      if (!label_id) {
        throw ValidationError(where + ": unknown label \"" + label + "\"");
      }
      GroundTruthInstance inst;
      inst.video_id = video_id;
      inst.label_id = *label_id;
      inst.segment = parse_segment(detail::require_member(ja, "segment", where), where);
      if (auto v = validate_segment(inst.segment)) {
        throw ValidationError(where + ": " + *v);
      }
      if (inst.segment.end > video.duration) {
        throw ValidationError(where + ": segment outside video duration");
      }
      video.instances.push_back(std::move(inst));
    }
    gt.videos.emplace(video_id, std::move(video));
  }
  return gt;
}

PredictionSet load_predictions(std::string_view bytes, const LabelSpace& space) {
  const auto j = detail::parse_json(bytes, "predictions");
  check_version(j, "predictions");

  PredictionSet preds;
  preds.model_name = detail::require_string(j, "model", "predictions");
  preds.model_weight = detail::require_number(j, "weight", "predictions");
  if (!std::isfinite(preds.model_weight) || preds.model_weight <= 0.0) {
    throw ValidationError("predictions: model weight must be positive");
  }

  const auto& jresults = detail::require_member(j, "results", "predictions");
  if (!jresults.is_object()) {
    throw SchemaError("predictions: \"results\" must be an object");
  }
  for (const auto& [video_id, jdets] : jresults.items()) {
    const std::string vwhere = "video \"" + video_id + "\"";
    if (!jdets.is_array()) {
      throw SchemaError(vwhere + ": expected an array of detections");
    }
    std::vector<Detection> dets;
    dets.reserve(jdets.size());
    for (std::size_t i = 0; i < jdets.size(); ++i) {
      const std::string where = vwhere + " detection " + std::to_string(i);
      const auto& jd = jdets[i];
      const std::string label = detail::require_string(jd, "label", where);
      const auto label_id = space.find(label);
      if (!label_id) {
        throw ValidationError(where + ": unknown label \"" + label + "\"");
      }
      Detection d;
      d.video_id = video_id;
      d.label_id = *label_id;
      d.segment = parse_segment(detail::require_member(jd, "segment", where), where);
      d.score = detail::require_number(jd, "score", where);
      if (auto v = validate_detection(d, space)) {
        throw ValidationError(where + ": " + *v);
      }
      dets.push_back(std::move(d));
    }
    preds.results.emplace(video_id, std::move(dets));
  }
  return preds;
}

std::vector<std::string> scan_prediction_labels(std::string_view bytes) {
  const auto j = detail::parse_json(bytes, "predictions");
  const auto& jresults = detail::require_member(j, "results", "predictions");
  if (!jresults.is_object()) {
    throw SchemaError("predictions: \"results\" must be an object");
  }
  std::set<std::string> seen;
  for (const auto& [video_id, jdets] : jresults.items()) {
    if (!jdets.is_array()) continue;
    for (const auto& jd : jdets) {
      if (jd.is_object() && jd.contains("label") && jd["label"].is_string()) {
        seen.insert(jd["label"].get<std::string>());
      }
    }
  }
  return {seen.begin(), seen.end()};
}

std::string save_ground_truth(const GroundTruthSet& gt) {
  std::string out = "{\"labels\":[";
  for (std::size_t i = 0; i < gt.label_space.names().size(); ++i) {
    if (i > 0) out += ',';
    append_json_string(out, gt.label_space.names()[i]);
  }
  out += "],\"version\":\"1.0\",\"videos\":{";
  bool first_video = true;
  for (const auto& [video_id, video] : gt.videos) {
    if (!first_video) out += ',';
    first_video = false;
    append_json_string(out, video_id);
    out += ":{\"annotations\":[";
    auto instances = video.instances;
    std::sort(instances.begin(), instances.end(), annotation_before);
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (i > 0) out += ',';
      out += "{\"label\":";
      append_json_string(out, gt.label_space.name(instances[i].label_id));
      out += ",\"segment\":[" + canonical_number(instances[i].segment.start) + "," +
             canonical_number(instances[i].segment.end) + "]}";
    }
    out += "],\"duration\":" + canonical_number(video.duration) + "}";
  }
  out += "}}\n";
  return out;
}

std::string save_predictions(const PredictionSet& preds, const LabelSpace& space) {
  std::string out = "{\"model\":";
  append_json_string(out, preds.model_name);
  out += ",\"results\":{";
  bool first_video = true;
  for (const auto& [video_id, dets] : preds.results) {
    if (!first_video) out += ',';
    first_video = false;
    append_json_string(out, video_id);
    out += ":[";
    auto sorted = dets;
    std::sort(sorted.begin(), sorted.end(), detection_before);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (i > 0) out += ',';
      out += "{\"label\":";
      append_json_string(out, space.name(sorted[i].label_id));
      out += ",\"score\":" + canonical_number(sorted[i].score) + ",\"segment\":[" +
             canonical_number(sorted[i].segment.start) + "," +
             canonical_number(sorted[i].segment.end) + "]}";
    }
    out += "]";
  }
  out += "},\"version\":\"1.0\",\"weight\":" + canonical_number(preds.model_weight) + "}\n";
  return out;
}

MappingResult build_label_mapping(const LabelSpace& source, const LabelSpace& target,
                                  const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> canon_overrides;  // canonical source -> exact target name
  for (const auto& [src, tgt] : overrides) {
    const auto t = target.find(tgt);
    if (!t) {
      throw ConfigError("override target \"" + tgt + "\" is not in the target label space");
    }
    canon_overrides[LabelSpace::canonical(src)] = target.name(*t);
  }

  MappingResult out;
  for (const auto& name : source.names()) {
    const auto canon = LabelSpace::canonical(name);
    if (auto it = canon_overrides.find(canon); it != canon_overrides.end()) {
      out.mapping.entries[canon] = LabelMapping::Target{it->second, MapProvenance::Override};
    } else if (auto t = target.find(name)) {
      out.mapping.entries[canon] = LabelMapping::Target{target.name(*t), MapProvenance::ExactMatch};
    } else {
      out.unmapped.push_back(name);
    }
  }
  return out;
}

MergeResult merge_datasets(const GroundTruthSet& primary, const GroundTruthSet& aux,
                           const LabelMapping& mapping, std::string_view aux_prefix) {
  MergeResult res;
  res.merged = primary;

  // aux label id -> primary label id, or -1 for dropped labels
  std::vector<int> relabel(static_cast<std::size_t>(aux.label_space.size()), -1);
  for (int i = 0; i < aux.label_space.size(); ++i) {
    const auto canon = LabelSpace::canonical(aux.label_space.name(i));
    if (auto it = mapping.entries.find(canon); it != mapping.entries.end()) {
      const auto target_id = primary.label_space.find(it->second.target_name);
      if (!target_id) {
        throw ConfigError("mapping target \"" + it->second.target_name +
                          "\" is not in the primary label space");
      }
      relabel[static_cast<std::size_t>(i)] = *target_id;
    }
  }

  std::vector<int> dropped(static_cast<std::size_t>(aux.label_space.size()), 0);
  std::set<int> used_labels;
  for (const auto& [video_id, video] : aux.videos) {
    const std::string new_id = std::string(aux_prefix) + "/" + video_id;
    std::vector<GroundTruthInstance> kept;
    for (const auto& inst : video.instances) {
      const int target_id = relabel[static_cast<std::size_t>(inst.label_id)];
      if (target_id < 0) {
        ++dropped[static_cast<std::size_t>(inst.label_id)];
        continue;
      }
      kept.push_back(GroundTruthInstance{new_id, target_id, inst.segment});
      used_labels.insert(inst.label_id);
    }
    if (kept.empty()) continue;
    if (res.merged.videos.contains(new_id)) {
      throw ValidationError("video id collision: \"" + new_id + "\" already exists");
    }
    res.report.instances_added += static_cast<int>(kept.size());
    res.merged.videos.emplace(new_id, VideoAnnotations{video.duration, std::move(kept)});
    ++res.report.videos_added;
  }
  res.report.labels_mapped = static_cast<int>(used_labels.size());
  for (int i = 0; i < aux.label_space.size(); ++i) {
    if (dropped[static_cast<std::size_t>(i)] > 0) {
      res.report.labels_dropped.emplace_back(aux.label_space.name(i),
                                             dropped[static_cast<std::size_t>(i)]);
    }
  }
  return res;
}

std::map<std::string, std::string> load_label_overrides(std::string_view bytes) {
  const auto j = detail::parse_json(bytes, "label overrides");
  if (!j.is_object()) {
    throw SchemaError("label overrides: expected a JSON object");
  }
  std::map<std::string, std::string> out;
  for (const auto& [src, tgt] : j.items()) {
    if (!tgt.is_string()) {
      throw SchemaError("label overrides: value for \"" + src + "\" must be a string");
    }
    out[src] = tgt.get<std::string>();
  }
  return out;
}

std::string merge_report_to_json(const MergeReport& report) {
  nlohmann::json j;
  j["instances_added"] = report.instances_added;
  j["labels_mapped"] = report.labels_mapped;
  j["videos_added"] = report.videos_added;
  nlohmann::json dropped = nlohmann::json::array();
  for (const auto& [label, n] : report.labels_dropped) {
    nlohmann::json entry;
    entry["label"] = label;
    entry["instances"] = n;
    dropped.push_back(std::move(entry));
  }
  j["labels_dropped"] = std::move(dropped);
  return j.dump(2) + "\n";
}

}  // namespace talfuse
