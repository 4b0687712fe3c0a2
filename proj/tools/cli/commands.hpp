#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "topkcal/pipeline.hpp"
#include "topkcal/synth.hpp"

namespace topkcal::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kAlignmentError = 2,
  kConfigError = 3,
};

enum class ReportFormat { json, csv };

struct RunConfig {
  std::string subcommand;

  std::string truth_path;
  std::string preds_path;
  std::string baseline_path;
  std::string report_in_path;
  std::string calib_truth_path;
  std::string calib_preds_path;
  std::string dataset;

  std::vector<std::size_t> ks{1, 3, 5};
  std::size_t bins = 10;
  bool strict_ids = false;
  bool streaming = false;
  std::size_t threads = 0;
  ReportFormat format = ReportFormat::json;

  CalibrationConfig calibration;  // calibration.k == 0 means max(ks)

  std::string out_path;     // evaluate: report; recalibrate: dump
  std::string report_path;  // recalibrate: paired report
  std::string models_out;

  WorldParams world;
  std::string distortion = "temperature:0.5";
  std::string truth_out;
  std::string preds_out;

  std::size_t plot_k = 3;
  std::string reliability_out;
  std::string histogram_out;
};

int cmd_evaluate(const RunConfig& config, std::ostream& out);
int cmd_recalibrate(const RunConfig& config, std::ostream& out);
int cmd_generate(const RunConfig& config, std::ostream& out);
int cmd_plotdata(const RunConfig& config, std::ostream& out);

/// Parses flags, dispatches, and maps errors to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace topkcal::cli
