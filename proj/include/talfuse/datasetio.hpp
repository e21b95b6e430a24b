#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "talfuse/core.hpp"

namespace talfuse {

// File formats (version "1.0"):
//
// Ground truth:
//   {"version":"1.0","labels":["<name>",...],
//    "videos":{"<id>":{"duration":<s>,
//                      "annotations":[{"label":"<name>","segment":[<s>,<e>]},...]},...}}
// Predictions:
//   {"version":"1.0","model":"<name>","weight":<w>,
//    "results":{"<id>":[{"label":"<name>","segment":[<s>,<e>],"score":<s>},...],...}}
//
// Saves are canonical: object keys sorted, numbers rounded to six fractional
// digits with trailing zeros stripped, annotations sorted by (start, end,
// label id), detections by (score desc, start, end, label id). load(save(x))
// is the identity for values on that six-decimal grid, and save(load(bytes))
// is byte-identical for canonical files.

GroundTruthSet load_ground_truth(std::string_view bytes);
PredictionSet load_predictions(std::string_view bytes, const LabelSpace& space);

// Distinct label names appearing in a prediction file, sorted. Lets callers
// assemble a label space when no ground truth is at hand.
std::vector<std::string> scan_prediction_labels(std::string_view bytes);

std::string save_ground_truth(const GroundTruthSet& gt);
std::string save_predictions(const PredictionSet& preds, const LabelSpace& space);

enum class MapProvenance { ExactMatch, Override };

// Function from source label names to target label names; many-to-one is
// allowed. Keys are canonical source names.
struct LabelMapping {
  struct Target {
    std::string target_name;
    MapProvenance provenance = MapProvenance::ExactMatch;
  };
  std::map<std::string, Target> entries;
};

struct MappingResult {
  LabelMapping mapping;
  std::vector<std::string> unmapped;  // source labels with no target, in source order
};

// Overrides win over exact canonical-name matches; sources with neither are
// reported unmapped. Throws ConfigError when an override target does not
// exist in the target space.
MappingResult build_label_mapping(const LabelSpace& source, const LabelSpace& target,
                                  const std::map<std::string, std::string>& overrides = {});

struct MergeReport {
  int instances_added = 0;
  int labels_mapped = 0;  // distinct aux labels that contributed instances
  std::vector<std::pair<std::string, int>> labels_dropped;  // source label, instance count
  int videos_added = 0;
};

struct MergeResult {
  GroundTruthSet merged;
  MergeReport report;
};

// Relabels mapped aux instances into the primary label space and appends them
// under "<aux_prefix>/<video id>" ids; unmapped labels are dropped and
// counted. Aux videos whose instances are all dropped are not added. Primary
// content is never touched. Throws ValidationError on a video id collision.
MergeResult merge_datasets(const GroundTruthSet& primary, const GroundTruthSet& aux,
                           const LabelMapping& mapping, std::string_view aux_prefix = "aux");

// Label-override file: a JSON object of "source name": "target name" pairs.
std::map<std::string, std::string> load_label_overrides(std::string_view bytes);

std::string merge_report_to_json(const MergeReport& report);

}  // namespace talfuse
