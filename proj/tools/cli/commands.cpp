#include "cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cli/report_io.hpp"
#include "topkcal/error.hpp"
#include "topkcal/ingest.hpp"

namespace topkcal::cli {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::input, "cannot open " + path);
  return in;
}

void write_output(const std::string& path, std::ostream& fallback,
                  const std::function<void(std::ostream&)>& emit) {
  if (path.empty() || path == "-") {
    emit(fallback);
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::input, "cannot write " + path);
  emit(file);
  file.flush();
  if (!file) throw Error(ErrorKind::input, "write failed for " + path);
}

std::vector<GroundTruth> load_truth(const std::string& path) {
  auto in = open_input(path);
  return parse_repo_file(in).second;
}

std::vector<TopKPredictions> load_preds(const std::string& path) {
  auto in = open_input(path);
  return parse_prediction_dump(in).rows;
}

[[noreturn]] void count_mismatch(std::uint64_t truth, std::uint64_t preds) {
  throw Error(ErrorKind::alignment, "alignment mismatch: truth has " + std::to_string(truth) +
                                        " rows, predictions have " + std::to_string(preds) +
                                        " rows");
}

void check_ids(const GroundTruth& gt, const TopKPredictions& row, std::size_t position) {
  if (gt.instance_id != row.instance_id) {
    throw Error(ErrorKind::alignment, "instance id mismatch at row " + std::to_string(position) +
                                          ": truth " + std::to_string(gt.instance_id) +
                                          ", predictions " + std::to_string(row.instance_id));
  }
}

void check_alignment(const std::vector<GroundTruth>& truth,
                     const std::vector<TopKPredictions>& preds, bool strict) {
  if (truth.size() != preds.size()) count_mismatch(truth.size(), preds.size());
  if (strict) {
    for (std::size_t i = 0; i < truth.size(); ++i) check_ids(truth[i], preds[i], i);
  }
}

std::string dataset_name(const RunConfig& config) {
  if (!config.dataset.empty()) return config.dataset;
  return std::filesystem::path(config.truth_path).stem().string();
}

std::string percent(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

const char* method_name(CalibrationMethod m) {
  return m == CalibrationMethod::platt ? "platt" : "isotonic";
}

const char* mode_name(CalibrationMode m) {
  return m == CalibrationMode::separate ? "separate" : "joint";
}

// Single pass over both files; memory does not grow with file length.
std::vector<KMetrics> evaluate_streaming(const RunConfig& config) {
  auto truth_in = open_input(config.truth_path);
  auto preds_in = open_input(config.preds_path);
  RepoReader truth_reader(truth_in);
  PredictionReader pred_reader(preds_in);
  MetricAccumulator acc(config.ks, config.bins, /*retain_pairs=*/false);

  TopKPredictions row;
  std::uint64_t position = 0;
  while (true) {
    auto gt = truth_reader.next();
    const bool have_row = pred_reader.next(row);
    if (!gt || !have_row) {
      if (gt || have_row) {
        std::uint64_t truth_count = truth_reader.instances_read();
        std::uint64_t pred_count = pred_reader.rows_read();
        while (truth_reader.next()) {
        }
        while (pred_reader.next(row)) {
        }
        truth_count = truth_reader.instances_read();
        pred_count = pred_reader.rows_read();
        count_mismatch(truth_count, pred_count);
      }
      break;
    }
    if (config.strict_ids) check_ids(*gt, row, position);
    acc.add(row, *gt);
    ++position;
  }
  return acc.finish();
}

Json config_json(const RunConfig& config) {
  Json c;
  c["command"] = config.subcommand;
  c["truth"] = config.truth_path;
  c["predictions"] = config.preds_path;
  c["ks"] = config.ks;
  c["bins"] = config.bins;
  c["strict_ids"] = config.strict_ids;
  c["streaming"] = config.streaming;
  return c;
}

Json report_json(const RunConfig& config, const std::vector<KMetrics>& blocks) {
  Json report;
  report["dataset"] = dataset_name(config);
  report["units"] = "percent";
  report["k_blocks"] = blocks_to_json(blocks);
  report["config"] = config_json(config);
  return report;
}

std::size_t calibration_k(const RunConfig& config) {
  if (config.calibration.k != 0) return config.calibration.k;
  return *std::max_element(config.ks.begin(), config.ks.end());
}

}  // namespace

int cmd_evaluate(const RunConfig& config, std::ostream& out) {
  if (config.ks.empty()) throw Error(ErrorKind::config, "empty k set");
  std::vector<KMetrics> blocks;
  if (config.streaming) {
    blocks = evaluate_streaming(config);
  } else {
    const auto truth = load_truth(config.truth_path);
    const auto preds = load_preds(config.preds_path);
    check_alignment(truth, preds, config.strict_ids);
    blocks = evaluate_report(preds, truth, config.ks, {config.bins, config.threads, true}).blocks;
  }

  Json report = report_json(config, blocks);
  if (!config.baseline_path.empty()) {
    const Json baseline = read_json_file(config.baseline_path);
    report["baseline"] = baseline.at("k_blocks");
    report["deltas"] = deltas_json(report["baseline"], report["k_blocks"]);
  }
  write_output(config.out_path, out, [&](std::ostream& os) {
    if (config.format == ReportFormat::csv) {
      write_report_csv(os, report);
    } else {
      os << dump_json(report);
    }
  });
  return kOk;
}

int cmd_recalibrate(const RunConfig& config, std::ostream& out) {
  if (config.ks.empty()) throw Error(ErrorKind::config, "empty k set");
  if (config.out_path.empty()) throw Error(ErrorKind::config, "--out is required");
  const auto truth = load_truth(config.truth_path);
  const auto preds = load_preds(config.preds_path);
  check_alignment(truth, preds, config.strict_ids);

  CalibrationConfig calib = config.calibration;
  calib.k = calibration_k(config);
  const bool split = !config.calib_truth_path.empty() || !config.calib_preds_path.empty();

  RecalibrationResult result;
  if (split) {
    if (config.calib_truth_path.empty() || config.calib_preds_path.empty()) {
      throw Error(ErrorKind::config, "--calib-truth and --calib-preds go together");
    }
    const auto calib_truth = load_truth(config.calib_truth_path);
    const auto calib_preds = load_preds(config.calib_preds_path);
    check_alignment(calib_truth, calib_preds, config.strict_ids);
    result = split_recalibrate(calib_preds, calib_truth, preds, calib);
  } else {
    result = kfold_recalibrate(preds, truth, calib);
  }

  const EvaluateOptions eval{config.bins, config.threads, true};
  const auto pre = evaluate_report(preds, truth, config.ks, eval);
  const auto post = evaluate_report(result.rows, truth, config.ks, eval);

  write_output(config.out_path, out,
               [&](std::ostream& os) { write_prediction_dump(os, result.rows); });

  Json report = report_json(config, post.blocks);
  report["config"]["method"] = method_name(calib.method);
  report["config"]["mode"] = mode_name(calib.mode);
  report["config"]["calib_k"] = calib.k;
  report["config"]["protocol"] = split ? "split" : "kfold";
  if (!split) {
    report["config"]["folds"] = calib.folds;
    report["config"]["seed"] = calib.seed;
  }
  report["baseline"] = blocks_to_json(pre.blocks);
  report["deltas"] = deltas_json(report["baseline"], report["k_blocks"]);
  report["warnings"] = warnings_to_json(result.warnings);
  if (!config.report_path.empty()) {
    write_output(config.report_path, out, [&](std::ostream& os) { os << dump_json(report); });
  }

  if (!config.models_out.empty()) {
    const auto& fit_preds = preds;
    std::vector<Calibrator> models;
    if (calib.mode == CalibrationMode::joint) {
      models.push_back(joint_calibrate(fit_preds, truth, calib.method, calib.k));
    } else {
      models = separate_calibrate(fit_preds, truth, calib.method, calib.k);
    }
    write_output(config.models_out, out, [&](std::ostream& os) { write_calibrators(os, models); });
  }

  for (const auto& w : result.warnings) {
    out << "warning: fold " << w.fold << " rank " << w.rank << ": " << w.message << '\n';
  }
  for (const auto& d : report["deltas"]) {
    const auto k = d.at("k").get<std::size_t>();
    const Json* pre_block = nullptr;
    const Json* post_block = nullptr;
    for (const auto& b : report["baseline"]) {
      if (b.at("k") == k) pre_block = &b;
    }
    for (const auto& b : report["k_blocks"]) {
      if (b.at("k") == k) post_block = &b;
    }
    out << "k=" << k << "  ECE@k " << percent(pre_block->at("ece").get<double>()) << " -> "
        << percent(post_block->at("ece").get<double>()) << "  P@k delta "
        << percent(d.at("p_at_k").get<double>()) << " (percent)\n";
  }
  return kOk;
}

int cmd_generate(const RunConfig& config, std::ostream& out) {
  if (config.truth_out.empty() || config.preds_out.empty()) {
    throw Error(ErrorKind::config, "--truth-out and --preds-out are required");
  }
  const auto distortion = Distortion::parse(config.distortion);
  const auto world = generate_world(config.world, config.threads ? config.threads : 1);
  const auto dump = distort(world, distortion);

  write_output(config.truth_out, out, [&](std::ostream& os) {
    write_repo_file(os, {world.n, 1, world.m}, world.truth);
  });
  write_output(config.preds_out, out, [&](std::ostream& os) { write_prediction_dump(os, dump); });

  const double analytic = analytic_ece(world, dump, world.k, config.bins);
  out << "analytic ECE@" << world.k << ": " << percent(analytic * kPercent) << " percent ("
      << distortion.to_string() << ")\n";
  return kOk;
}

int cmd_plotdata(const RunConfig& config, std::ostream& out) {
  if (config.reliability_out.empty() || config.histogram_out.empty()) {
    throw Error(ErrorKind::config, "--reliability-out and --histogram-out are required");
  }
  std::vector<ReliabilityRow> rows;
  if (!config.report_in_path.empty()) {
    rows = reliability_from_report(read_json_file(config.report_in_path), config.plot_k);
  } else {
    const auto truth = load_truth(config.truth_path);
    const auto preds = load_preds(config.preds_path);
    check_alignment(truth, preds, config.strict_ids);
    const auto report =
        evaluate_report(preds, truth, {config.plot_k}, {config.bins, config.threads, false});
    rows = reliability_rows(report.blocks.front().reliability);
  }
  write_output(config.reliability_out, out, [&](std::ostream& os) { write_reliability_csv(os, rows); });
  write_output(config.histogram_out, out, [&](std::ostream& os) { write_histogram_csv(os, rows); });
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig config;
  CLI::App app{"Top-k calibration metrics and post-hoc recalibration for extreme multi-label classifiers",
               "topkcal"};
  app.require_subcommand(1);

  std::string method = "isotonic";
  std::string mode = "joint";
  std::string format = "json";

  auto add_inputs = [&](CLI::App* sub, bool required) {
    auto* t = sub->add_option("--truth", config.truth_path, "Ground truth (repository format)");
    auto* p = sub->add_option("--preds", config.preds_path, "Prediction dump (TSV)");
    if (required) {
      t->required();
      p->required();
    }
    sub->add_option("--bins", config.bins, "Number of fixed-width bins")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
    sub->add_flag("--strict-ids", config.strict_ids, "Require matching instance ids");
    sub->add_option("--threads", config.threads, "Worker threads (0: all cores)");
  };

  auto* evaluate = app.add_subcommand("evaluate", "Compute calibration and ranking metrics");
  add_inputs(evaluate, true);
  evaluate->add_option("--k", config.ks, "Comma-separated k values")->delimiter(',')
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--out", config.out_path, "Report path (default: stdout)");
  evaluate->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  evaluate->add_option("--baseline", config.baseline_path, "Earlier report to diff against");
  evaluate->add_option("--dataset", config.dataset, "Dataset name for the report");
  evaluate->add_flag("--streaming", config.streaming, "Bounded-memory single pass (no ACE)");

  auto* recal = app.add_subcommand("recalibrate", "Cross-validated post-hoc recalibration");
  add_inputs(recal, true);
  recal->add_option("--k", config.ks, "Comma-separated k values to report")->delimiter(',')
      ->check(CLI::PositiveNumber);
  recal->add_option("--calib-k", config.calibration.k, "Ranks used for fitting (default: max k)");
  recal->add_option("--method", method, "isotonic or platt")
      ->check(CLI::IsMember({"isotonic", "platt"}));
  recal->add_option("--mode", mode, "joint or separate")->check(CLI::IsMember({"joint", "separate"}));
  recal->add_option("--folds", config.calibration.folds, "Cross-validation folds (>= 2)")
      ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 30));
  recal->add_option("--seed", config.calibration.seed, "Fold assignment seed");
  recal->add_option("--out", config.out_path, "Recalibrated dump path")->required();
  recal->add_option("--report", config.report_path, "Before/after report path");
  recal->add_option("--save-models", config.models_out, "Write calibrators fitted on all data");
  recal->add_option("--calib-truth", config.calib_truth_path, "Explicit calibration split truth");
  recal->add_option("--calib-preds", config.calib_preds_path, "Explicit calibration split dump");
  recal->add_option("--dataset", config.dataset, "Dataset name for the report");

  auto* generate = app.add_subcommand("generate", "Write a synthetic world and its distorted dump");
  generate->add_option("--n", config.world.n, "Instances")->check(CLI::PositiveNumber);
  generate->add_option("--m", config.world.m, "Labels")->check(CLI::PositiveNumber);
  generate->add_option("--k", config.world.k, "Shortlist length")->check(CLI::PositiveNumber);
  generate->add_option("--tail-exponent", config.world.tail_exponent, "Power-law prior exponent");
  generate->add_option("--distort", config.distortion,
                       "identity | temperature:T | midrange:G | softmax_normalize");
  generate->add_option("--seed", config.world.seed, "Generator seed");
  generate->add_option("--bins", config.bins, "Bins for the printed analytic ECE")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
  generate->add_option("--threads", config.threads, "Worker threads");
  generate->add_option("--truth-out", config.truth_out, "Ground truth output")->required();
  generate->add_option("--preds-out", config.preds_out, "Prediction dump output")->required();

  auto* plot = app.add_subcommand("plotdata", "Emit reliability and histogram CSV tables");
  add_inputs(plot, false);
  plot->add_option("--report", config.report_in_path, "Read bins from an evaluate report");
  plot->add_option("--k", config.plot_k, "k of the plotted block")->check(CLI::PositiveNumber);
  plot->add_option("--reliability-out", config.reliability_out, "Reliability CSV")->required();
  plot->add_option("--histogram-out", config.histogram_out, "Histogram CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  config.calibration.method = method == "platt" ? CalibrationMethod::platt : CalibrationMethod::isotonic;
  config.calibration.mode = mode == "separate" ? CalibrationMode::separate : CalibrationMode::joint;
  config.format = format == "csv" ? ReportFormat::csv : ReportFormat::json;

  try {
    if (evaluate->parsed()) {
      config.subcommand = "evaluate";
      return cmd_evaluate(config, out);
    }
    if (recal->parsed()) {
      config.subcommand = "recalibrate";
      return cmd_recalibrate(config, out);
    }
    if (generate->parsed()) {
      config.subcommand = "generate";
      return cmd_generate(config, out);
    }
    config.subcommand = "plotdata";
    if (config.report_in_path.empty() && (config.truth_path.empty() || config.preds_path.empty())) {
      throw Error(ErrorKind::config, "plotdata needs --report or both --truth and --preds");
    }
    return cmd_plotdata(config, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::alignment:
        return kAlignmentError;
      case ErrorKind::config:
        return kConfigError;
      case ErrorKind::input:
      case ErrorKind::data:
        return kInputError;
    }
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace topkcal::cli
