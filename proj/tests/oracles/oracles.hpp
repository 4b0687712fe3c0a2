#pragma once

// Reference implementations used only by tests. Each one takes a deliberately
// different route from the library code it checks: MPFR instead of the
// fixed-point accumulator, linear edge scans instead of index arithmetic,
// exhaustive search instead of PAV, grid search instead of Newton.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "topkcal/calibrate.hpp"
#include "topkcal/metrics.hpp"
#include "topkcal/synth.hpp"
#include "topkcal/types.hpp"

namespace topkcal::oracle {

/// Exact sum via 2200-bit MPFR, rounded to nearest double.
double mpfr_sum(std::span<const double> values);

/// ECE by explicit grouping of pairs into fixed-width bins found by a linear
/// scan over the edges i/bins.
double brute_force_ece(std::span<const CalibrationPair> pairs, std::size_t bins);

/// ACE by sorting pairs and dealing them into equal-mass bins one by one.
double brute_force_ace(std::span<const CalibrationPair> pairs, std::size_t bins);

/// Mean |p - y| computed exactly.
double mean_abs_error(std::span<const CalibrationPair> pairs);

/// Least-squares monotone fit by enumerating every contiguous partition of the
/// distinct scores (n <= ~16). Returns the fitted value for each input pair.
std::vector<double> brute_force_isotonic(std::span<const ScoreOutcome> pairs);

/// Grid search of the mean logistic loss over (a, b), refined around the best
/// coarse cell. Data are aggregated by distinct score first.
PlattModel grid_search_platt(std::span<const ScoreOutcome> pairs, double lo, double hi);

/// Bootstrap standard error of the Monte Carlo ECE, resampling instances.
double bootstrap_ece_stderr(std::span<const TopKPredictions> preds,
                            std::span<const GroundTruth> truth, std::size_t k, std::size_t bins,
                            std::size_t replicates, std::uint64_t seed);

/// The two-instance, two-label world where each label is calibrated on its
/// own but the top-1 prediction is not.
struct Counterexample {
  SyntheticWorld world;        // true conditionals
  DenseScoreMatrix scores;     // classifier output psi
  DenseScoreMatrix expected;   // true conditionals as a matrix
  std::vector<TopKPredictions> top1;
};
Counterexample table_counterexample();

/// The counterexample in expectation mode for sampled-outcome metrics: each
/// instance is repeated `copies` times and labels are assigned so that every
/// label's positive frequency equals its conditional exactly.
struct ReplicatedFixture {
  std::vector<TopKPredictions> preds;
  std::vector<GroundTruth> truth;
};
ReplicatedFixture replicated_counterexample(std::size_t copies = 10);

/// Random pairs with confidences drawn from a mix of continuous values, bin
/// edges, and repeated values.
std::vector<CalibrationPair> random_pairs(std::mt19937_64& rng, std::size_t n);

}  // namespace topkcal::oracle
