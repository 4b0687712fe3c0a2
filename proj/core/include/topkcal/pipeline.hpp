#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topkcal/calibrate.hpp"
#include "topkcal/metrics.hpp"
#include "topkcal/types.hpp"

namespace topkcal {

/// Seeded partition of instance positions into `folds` disjoint sets whose
/// sizes differ by at most one. A pure function of (n, folds, seed).
struct FoldAssignment {
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> fold_of;  // per instance position

  static FoldAssignment make(std::size_t n, std::size_t folds, std::uint64_t seed);

  std::vector<std::size_t> members(std::size_t fold) const;
  std::vector<std::size_t> sizes() const;
};

enum class CalibrationMode { joint, separate };

struct CalibrationConfig {
  CalibrationMethod method = CalibrationMethod::isotonic;
  CalibrationMode mode = CalibrationMode::joint;
  std::size_t k = 5;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
};

/// Non-fatal event raised while fitting, e.g. a one-class fold under Platt.
struct RecalibrationWarning {
  std::size_t fold = 0;
  std::size_t rank = 0;  // 0 for joint models
  std::string message;
};

struct RecalibrationResult {
  std::vector<TopKPredictions> rows;
  std::vector<RecalibrationWarning> warnings;
};

/// One calibrator over all pooled (probability, correctness) pairs from ranks
/// 1..k. Maps that would reverse the ranking (Platt with a > 0) are replaced
/// by the constant outcome-rate model.
Calibrator joint_calibrate(std::span<const TopKPredictions> preds,
                           std::span<const GroundTruth> truth, CalibrationMethod method,
                           std::size_t k);

/// One calibrator per rank position 1..k. Throws "empty rank slice" when a
/// rank has no pairs.
std::vector<Calibrator> separate_calibrate(std::span<const TopKPredictions> preds,
                                           std::span<const GroundTruth> truth,
                                           CalibrationMethod method, std::size_t k);

/// Maps every entry through `model`, keeping the original order.
TopKPredictions apply_joint(const Calibrator& model, const TopKPredictions& row);

/// Maps rank r through models[r-1] (ranks past the last model use the last
/// one), then re-sorts by calibrated probability. Entries that tie keep their
/// previous relative order.
TopKPredictions apply_separate(std::span<const Calibrator> models, const TopKPredictions& row);

/// Cross-validated recalibration: every instance is recalibrated exactly once
/// by a model fitted on the other folds. Requires n >= folds >= 2.
RecalibrationResult kfold_recalibrate(std::span<const TopKPredictions> preds,
                                      std::span<const GroundTruth> truth,
                                      const CalibrationConfig& config);

/// Fits on an explicit calibration split and applies to `target`.
RecalibrationResult split_recalibrate(std::span<const TopKPredictions> calib_preds,
                                      std::span<const GroundTruth> calib_truth,
                                      std::span<const TopKPredictions> target,
                                      const CalibrationConfig& config);

struct MetricDelta {
  std::size_t k = 0;
  double ece = 0.0;
  std::optional<double> ace;
  double brier = 0.0;
  double nll = 0.0;
  double precision = 0.0;
  double ndcg = 0.0;
};

/// Full metric suite per k, plus reliability and histogram data.
struct MetricReport {
  std::size_t bins = 10;
  std::vector<KMetrics> blocks;
  std::vector<MetricDelta> deltas;  // current minus baseline, when supplied

  const KMetrics* block(std::size_t k) const;
};

struct EvaluateOptions {
  std::size_t bins = 10;
  std::size_t threads = 0;  // 0: hardware concurrency
  bool adaptive = true;     // compute ACE (retains all pairs in memory)
};

MetricReport evaluate_report(std::span<const TopKPredictions> preds,
                             std::span<const GroundTruth> truth, std::vector<std::size_t> ks,
                             const EvaluateOptions& options = {});

/// Per-k differences for every k present in both reports.
std::vector<MetricDelta> report_deltas(const MetricReport& baseline, const MetricReport& current);

}  // namespace topkcal
