#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "topkcal/types.hpp"

namespace topkcal {

/// Training example for a calibration map. Outcomes are 0/1 in practice;
/// fractional outcomes are accepted and treated as expectations.
struct ScoreOutcome {
  double score = 0.0;
  double outcome = 0.0;
};

/// Monotone step function. `thresholds[i]` is the lowest training score of
/// block i; `values` are the non-decreasing block means.
struct IsotonicModel {
  std::vector<double> thresholds;
  std::vector<double> values;

  friend bool operator==(const IsotonicModel&, const IsotonicModel&) = default;
};

/// Pool-adjacent-violators fit of the monotone least-squares map. Tied scores
/// share one block. Throws "insufficient calibration data" below 2 pairs.
IsotonicModel fit_isotonic(std::span<const ScoreOutcome> pairs);

/// Piecewise-constant evaluation; clamps to the first/last block outside the
/// training range.
double apply_isotonic(const IsotonicModel& model, double score);

/// s -> 1 / (1 + exp(a*s + b)).
struct PlattModel {
  double a = 0.0;
  double b = 0.0;

  friend bool operator==(const PlattModel&, const PlattModel&) = default;
};

struct PlattOptions {
  double gradient_tolerance = 1e-8;
  std::size_t max_iterations = 100;
  double min_rate = 1e-6;  // clamp for the one-class constant model
};

struct PlattFit {
  PlattModel model;
  std::size_t iterations = 0;
  bool converged = false;
  bool single_class = false;
};

/// Minimizes mean binary cross-entropy by damped Newton iteration. One-class
/// input returns the constant model matching the clamped outcome rate.
PlattFit fit_platt_detailed(std::span<const ScoreOutcome> pairs, const PlattOptions& options = {});
PlattModel fit_platt(std::span<const ScoreOutcome> pairs, const PlattOptions& options = {});

double apply_platt(const PlattModel& model, double score);

enum class CalibrationMethod { isotonic, platt };

/// How a calibrator reads its input: raw probability, or the clamped logit
/// of that probability.
enum class ScoreDomain { probability, logit };

/// A fitted map from a predicted probability to a recalibrated one.
struct Calibrator {
  std::variant<IsotonicModel, PlattModel, MinMaxSquash> model;
  ScoreDomain domain = ScoreDomain::probability;

  double operator()(double probability) const;

  /// True when the map is non-decreasing in its input.
  bool is_non_decreasing() const;

  friend bool operator==(const Calibrator&, const Calibrator&) = default;
};

struct CalibratorFit {
  Calibrator calibrator;
  bool single_class = false;
};

/// Fits on (probability, outcome) pairs. Isotonic works on probabilities
/// directly; Platt is fitted on their logits so that temperature-type
/// distortions lie inside the logistic family.
CalibratorFit fit_calibrator(CalibrationMethod method, std::span<const ScoreOutcome> pairs);

/// Versioned text serialization, 17-significant-digit floats.
void write_calibrators(std::ostream& out, std::span<const Calibrator> models);
std::vector<Calibrator> read_calibrators(std::istream& in);

}  // namespace topkcal
