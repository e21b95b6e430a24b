#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "talfuse/datasetio.hpp"
#include "talfuse/eval.hpp"
#include "talfuse/fusion.hpp"
#include "talfuse/simulator.hpp"

namespace {

using namespace talfuse;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open \"" + path + "\" for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) {
    throw IoError("failed reading \"" + path + "\"");
  }
  return std::move(ss).str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open \"" + path + "\" for writing");
  }
  out << bytes;
  if (!out) {
    throw IoError("failed writing \"" + path + "\"");
  }
}

// Rethrows load errors with the offending file name prepended, preserving
// the error type (and so the exit code).
template <typename Fn>
auto with_file_context(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError("\"" + path + "\": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError("\"" + path + "\": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError("\"" + path + "\": " + e.what());
  }
}

GroundTruthSet load_gt_file(const std::string& path) {
  return with_file_context(path, [&] { return load_ground_truth(read_file(path)); });
}

PredictionSet load_pred_file(const std::string& path, const LabelSpace& space) {
  return with_file_context(path, [&] { return load_predictions(read_file(path), space); });
}

std::vector<double> parse_threshold_csv(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse threshold \"" + item + "\"");
    }
  }
  if (out.empty()) {
    throw ConfigError("no thresholds given");
  }
  return out;
}

struct FuseArgs {
  std::vector<std::string> pred_files;
  std::vector<double> weights;
  std::string config_file, out_file;
  double iou_thr = 0.55, skip_thr = 0.0;
  std::string rescale = "min", score_combine = "wmean";
  // which flags were set on the command line (flags win over --config)
  bool iou_set = false, skip_set = false, rescale_set = false, combine_set = false;
};

void run_fuse(const FuseArgs& args) {
  FusionConfig config;
  if (!args.config_file.empty()) {
    config = fusion_config_from_json(read_file(args.config_file));
  }
  if (args.iou_set) config.iou_threshold = args.iou_thr;
  if (args.skip_set) config.skip_threshold = args.skip_thr;
  if (args.rescale_set) {
    if (args.rescale == "min") {
      config.rescale_mode = RescaleMode::MinClamp;
    } else if (args.rescale == "ratio") {
      config.rescale_mode = RescaleMode::Ratio;
    } else {
      config.rescale_mode = RescaleMode::None;
    }
  }
  if (args.combine_set) {
    if (args.score_combine == "wmean") {
      config.score_combine = ScoreCombine::WeightedMean;
    } else if (args.score_combine == "mean") {
      config.score_combine = ScoreCombine::Mean;
    } else {
      config.score_combine = ScoreCombine::Max;
    }
  }
  if (!args.weights.empty()) {
    if (args.weights.size() != args.pred_files.size()) {
      throw ConfigError("got " + std::to_string(args.weights.size()) + " weights for " +
                        std::to_string(args.pred_files.size()) + " prediction files");
    }
    config.model_weights = args.weights;
  }

  std::vector<std::string> file_bytes;
  file_bytes.reserve(args.pred_files.size());
  std::set<std::string> label_union;
  for (const auto& path : args.pred_files) {
    file_bytes.push_back(read_file(path));
    with_file_context(path, [&] {
      for (auto& name : scan_prediction_labels(file_bytes.back())) {
        label_union.insert(std::move(name));
      }
      return 0;
    });
  }
  const LabelSpace space(std::vector<std::string>(label_union.begin(), label_union.end()));

  std::vector<PredictionSet> inputs;
  inputs.reserve(file_bytes.size());
  for (std::size_t i = 0; i < file_bytes.size(); ++i) {
    const auto& path = args.pred_files[i];
    inputs.push_back(with_file_context(path, [&] { return load_predictions(file_bytes[i], space); }));
  }

  FusionStats stats;
  const auto fused = wbf_fuse(inputs, config, &stats);
  write_file(args.out_file, save_predictions(fused, space));
  std::cerr << "fuse: " << stats.input_detections << " detections in " << stats.groups
            << " (video,label) groups -> " << stats.clusters << " fused (" << stats.skipped
            << " below skip threshold)\n";
}

struct EvalArgs {
  std::string gt_file, pred_file, config_file, out_file, csv_file;
  std::string thresholds_csv;
  int max_dets = 0;
  double min_score = 0.0;
  bool max_dets_set = false, min_score_set = false, drop_unknown = false;
};

void run_eval(const EvalArgs& args) {
  EvalConfig config;
  if (!args.config_file.empty()) {
    config = eval_config_from_json(read_file(args.config_file));
  }
  if (!args.thresholds_csv.empty()) {
    config.tiou_thresholds = parse_threshold_csv(args.thresholds_csv);
  }
  if (args.max_dets_set) config.max_detections_per_video = args.max_dets;
  if (args.min_score_set) config.min_score = args.min_score;
  if (args.drop_unknown) config.unknown_video = UnknownVideoPolicy::Drop;

  const auto gt = load_gt_file(args.gt_file);
  const auto preds = load_pred_file(args.pred_file, gt.label_space);
  const auto report = evaluate(preds, gt, config);
  if (report.counts.detections_dropped > 0) {
    std::cerr << "warning: dropped " << report.counts.detections_dropped
              << " detections for videos absent from the ground truth\n";
  }
  if (!args.out_file.empty()) {
    write_file(args.out_file, report_to_json(report, gt.label_space));
  }
  if (!args.csv_file.empty()) {
    write_file(args.csv_file, report_to_csv(report, gt.label_space));
  }
  std::printf("%.4f\n", report.avg_map);
}

struct MergeArgs {
  std::string primary_file, aux_file, map_file, prefix = "aux", out_file, report_file;
};

void run_merge(const MergeArgs& args) {
  const auto primary = load_gt_file(args.primary_file);
  const auto aux = load_gt_file(args.aux_file);
  std::map<std::string, std::string> overrides;
  if (!args.map_file.empty()) {
    overrides = load_label_overrides(read_file(args.map_file));
  }
  const auto mapping = build_label_mapping(aux.label_space, primary.label_space, overrides);
  for (const auto& name : mapping.unmapped) {
    std::cerr << "note: aux label \"" << name << "\" has no target and will be dropped\n";
  }
  const auto result = merge_datasets(primary, aux, mapping.mapping, args.prefix);
  write_file(args.out_file, save_ground_truth(result.merged));
  if (!args.report_file.empty()) {
    write_file(args.report_file, merge_report_to_json(result.report));
  }
  std::cerr << "merge: added " << result.report.instances_added << " instances in "
            << result.report.videos_added << " videos; " << result.report.labels_mapped
            << " labels mapped, " << result.report.labels_dropped.size() << " dropped\n";
}

struct SimulateArgs {
  std::string config_file, fusion_config_file, eval_config_file, out_file;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void run_simulate(const SimulateArgs& args) {
  SimConfig config = args.config_file.empty() ? SimConfig::default_two_model()
                                              : sim_config_from_json(read_file(args.config_file));
  if (args.seed_set) config.seed = args.seed;
  FusionConfig fusion;
  if (!args.fusion_config_file.empty()) {
    fusion = fusion_config_from_json(read_file(args.fusion_config_file));
  }
  EvalConfig eval_cfg;
  if (!args.eval_config_file.empty()) {
    eval_cfg = eval_config_from_json(read_file(args.eval_config_file));
  }
  const auto report = run_ensemble_experiment(config, fusion, eval_cfg);
  std::cout << experiment_report_table(report);
  if (!args.out_file.empty()) {
    write_file(args.out_file, experiment_report_to_json(report));
  }
}

struct CompareArgs {
  std::string gt_file;
  std::vector<std::string> pred_files;
  std::string fused_file;
  std::string thresholds_csv;
};

void run_compare(const CompareArgs& args) {
  EvalConfig config;
  if (!args.thresholds_csv.empty()) {
    config.tiou_thresholds = parse_threshold_csv(args.thresholds_csv);
  }
  const auto gt = load_gt_file(args.gt_file);

  std::vector<std::pair<std::string, double>> rows;
  for (const auto& path : args.pred_files) {
    const auto preds = load_pred_file(path, gt.label_space);
    rows.emplace_back(preds.model_name, evaluate(preds, gt, config).avg_map);
  }
  std::optional<std::pair<std::string, double>> fused_row;
  if (!args.fused_file.empty()) {
    const auto fused = load_pred_file(args.fused_file, gt.label_space);
    fused_row = {fused.model_name, evaluate(fused, gt, config).avg_map};
  }

  char line[160];
  std::snprintf(line, sizeof line, "%-32s  %11s\n", "model", "avg mAP (%)");
  std::cout << line << std::string(32, '-') << "  " << std::string(11, '-') << "\n";
  for (const auto& [name, avg_map] : rows) {
    std::snprintf(line, sizeof line, "%-32s  %11.2f\n", name.c_str(), 100.0 * avg_map);
    std::cout << line;
  }
  if (fused_row) {
    std::snprintf(line, sizeof line, "%-32s  %11.2f\n", fused_row->first.c_str(),
                  100.0 * fused_row->second);
    std::cout << line;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal action localisation: WBF ensemble fusion, mAP evaluation,\n"
               "dataset merging and a seeded ensemble simulator."};
  app.require_subcommand(1);

  FuseArgs fuse_args;
  auto* fuse = app.add_subcommand("fuse", "Fuse prediction files with Weighted Box Fusion");
  fuse->add_option("--pred", fuse_args.pred_files, "Prediction file (repeatable)")
      ->required()
      ->expected(-1);
  fuse->add_option("--weight", fuse_args.weights, "Per-model weight, one per --pred");
  auto* iou_opt = fuse->add_option("--iou-thr", fuse_args.iou_thr, "Cluster tIoU threshold");
  auto* skip_opt = fuse->add_option("--skip-thr", fuse_args.skip_thr, "Discard detections below");
  auto* rescale_opt = fuse->add_option("--rescale", fuse_args.rescale, "Confidence rescale mode")
                          ->check(CLI::IsMember({"min", "ratio", "none"}));
  auto* combine_opt =
      fuse->add_option("--score-combine", fuse_args.score_combine, "Cluster score combination")
          ->check(CLI::IsMember({"wmean", "mean", "max"}));
  fuse->add_option("--config", fuse_args.config_file, "Fusion config JSON (flags win)");
  fuse->add_option("--out", fuse_args.out_file, "Output prediction file")->required();
  fuse->callback([&] {
    fuse_args.iou_set = iou_opt->count() > 0;
    fuse_args.skip_set = skip_opt->count() > 0;
    fuse_args.rescale_set = rescale_opt->count() > 0;
    fuse_args.combine_set = combine_opt->count() > 0;
    run_fuse(fuse_args);
  });

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate predictions with class-averaged mAP");
  eval_cmd->add_option("--gt", eval_args.gt_file, "Ground-truth file")->required();
  eval_cmd->add_option("--pred", eval_args.pred_file, "Prediction file")->required();
  eval_cmd->add_option("--thresholds", eval_args.thresholds_csv, "CSV of tIoU thresholds");
  auto* maxdets_opt =
      eval_cmd->add_option("--max-dets", eval_args.max_dets, "Per-video detection cap");
  auto* minscore_opt =
      eval_cmd->add_option("--min-score", eval_args.min_score, "Drop detections below");
  eval_cmd->add_flag("--drop-unknown-videos", eval_args.drop_unknown,
                     "Drop detections for unknown videos instead of failing");
  eval_cmd->add_option("--config", eval_args.config_file, "Eval config JSON (flags win)");
  eval_cmd->add_option("--out", eval_args.out_file, "Report JSON output");
  eval_cmd->add_option("--csv", eval_args.csv_file, "Report CSV output");
  eval_cmd->callback([&] {
    eval_args.max_dets_set = maxdets_opt->count() > 0;
    eval_args.min_score_set = minscore_opt->count() > 0;
    run_eval(eval_args);
  });

  MergeArgs merge_args;
  auto* merge = app.add_subcommand("merge", "Merge auxiliary annotations into a target label space");
  merge->add_option("--primary", merge_args.primary_file, "Primary ground-truth file")->required();
  merge->add_option("--aux", merge_args.aux_file, "Auxiliary ground-truth file")->required();
  merge->add_option("--map", merge_args.map_file, "Label override JSON file");
  merge->add_option("--prefix", merge_args.prefix, "Namespace prefix for aux video ids");
  merge->add_option("--out", merge_args.out_file, "Merged ground-truth output")->required();
  merge->add_option("--report", merge_args.report_file, "Merge report JSON output");
  merge->callback([&] { run_merge(merge_args); });

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Run the synthetic ensemble experiment");
  simulate->add_option("--config", sim_args.config_file, "Simulation config JSON");
  auto* seed_opt = simulate->add_option("--seed", sim_args.seed, "Override the config seed");
  simulate->add_option("--fusion-config", sim_args.fusion_config_file, "Fusion config JSON");
  simulate->add_option("--eval-config", sim_args.eval_config_file, "Eval config JSON");
  simulate->add_option("--out", sim_args.out_file, "Experiment report JSON output");
  simulate->callback([&] {
    sim_args.seed_set = seed_opt->count() > 0;
    run_simulate(sim_args);
  });

  CompareArgs compare_args;
  auto* compare = app.add_subcommand("compare", "Tabulate avg mAP for prediction files");
  compare->add_option("--gt", compare_args.gt_file, "Ground-truth file")->required();
  compare->add_option("--pred", compare_args.pred_files, "Prediction file (repeatable)")
      ->required()
      ->expected(-1);
  compare->add_option("--fused", compare_args.fused_file, "Fused prediction file");
  compare->add_option("--thresholds", compare_args.thresholds_csv, "CSV of tIoU thresholds");
  compare->callback([&] { run_compare(compare_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
