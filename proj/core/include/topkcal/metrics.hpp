#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "topkcal/exact_sum.hpp"
#include "topkcal/types.hpp"

namespace topkcal {

/// One scored (instance, rank) position: its confidence and its outcome.
/// Outcomes are 0/1 for sampled labels; expectation-mode oracles put the
/// true conditional probability there instead.
struct CalibrationPair {
  double confidence = 0.0;
  double outcome = 0.0;
  InstanceId instance_id = 0;
  std::uint32_t rank = 1;  // 1-based position in the shortlist
};

/// Pairs from the first min(k, |entries|) positions of every instance.
/// Throws an alignment error when the two spans differ in length.
std::vector<CalibrationPair> collect_pairs(std::span<const TopKPredictions> preds,
                                           std::span<const GroundTruth> truth, std::size_t k);

struct ReliabilityBin {
  double low = 0.0;
  double high = 0.0;
  std::uint64_t count = 0;
  double mean_conf = 0.0;  // 0 for empty bins
  double mean_acc = 0.0;   // 0 for empty bins
};

struct ReliabilityBins {
  std::vector<ReliabilityBin> bins;

  std::uint64_t total() const noexcept;
};

/// Fixed-width bin of a confidence. Bins are (a_i, a_{i+1}] except the first,
/// which is [0, a_1]; a_i = i / bins.
std::size_t bin_index(double confidence, std::size_t bins);

/// Mergeable fixed-width binning state.
class BinAccumulator {
 public:
  explicit BinAccumulator(std::size_t bins);

  void add(double confidence, double outcome);
  void merge(const BinAccumulator& other);
  std::size_t bins() const noexcept { return counts_.size(); }
  std::uint64_t total() const noexcept;
  ReliabilityBins finish() const;

 private:
  std::vector<std::uint64_t> counts_;
  std::vector<ExactSum> conf_;
  std::vector<ExactSum> acc_;
};

/// Σ count_i · |mean_acc_i − mean_conf_i| / n. Throws "no data" on n == 0.
double calibration_error(const ReliabilityBins& bins);

struct EceResult {
  double value = 0.0;
  ReliabilityBins reliability;
};

EceResult ece(std::span<const CalibrationPair> pairs, std::size_t bins = 10);
EceResult ece_at_k(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
                   std::size_t k, std::size_t bins = 10);

/// Equal-mass bins over pairs sorted by (confidence, instance_id, rank). The
/// first n % bins bins hold one extra pair.
ReliabilityBins adaptive_bins(std::span<const CalibrationPair> pairs, std::size_t bins);

EceResult ace(std::span<const CalibrationPair> pairs, std::size_t bins = 10);
EceResult ace_at_k(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
                   std::size_t k, std::size_t bins = 10);

/// Sum of per-label binned ECE for a dense probability matrix.
double marginal_ece(const DenseScoreMatrix& probs, std::span<const GroundTruth> truth,
                    std::size_t bins = 10);
/// Expectation mode: outcomes are given as a matrix of true conditionals.
double marginal_ece(const DenseScoreMatrix& probs, const DenseScoreMatrix& expected_outcomes,
                    std::size_t bins = 10);

double brier(std::span<const CalibrationPair> pairs);
double brier(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
             std::size_t k);

struct BrierDecomposition {
  double reliability = 0.0;
  double resolution = 0.0;
  double uncertainty = 0.0;

  double total() const noexcept { return reliability - resolution + uncertainty; }
};

double base_rate(std::span<const CalibrationPair> pairs);

/// Murphy decomposition from binned statistics. Throws on empty bins.
BrierDecomposition brier_decomposition(const ReliabilityBins& bins, double base_rate);

inline constexpr double kNllEpsilon = 1e-12;

double nll(std::span<const CalibrationPair> pairs, double eps = kNllEpsilon);
double nll(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
           std::size_t k, double eps = kNllEpsilon);

/// Mean over instances of |top-k ∩ relevant| / k.
double precision_at_k(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
                      std::size_t k);

/// Mean over instances of DCG@k / IDCG@k with 1/log2(r+1) discounts;
/// instances without relevant labels count as 0.
double ndcg_at_k(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
                 std::size_t k);

/// Counts of top-k probabilities per fixed-width bin.
std::vector<std::uint64_t> confidence_histogram(std::span<const TopKPredictions> preds,
                                                std::size_t k, std::size_t bins = 10);

/// Everything reported for one value of k.
struct KMetrics {
  std::size_t k = 0;
  std::uint64_t instances = 0;
  std::uint64_t pairs = 0;
  double ece = 0.0;
  std::optional<double> ace;  // absent when pairs were not retained
  double brier = 0.0;
  double nll = 0.0;
  double precision = 0.0;
  double ndcg = 0.0;
  BrierDecomposition decomposition;
  ReliabilityBins reliability;
  std::optional<ReliabilityBins> adaptive;
  std::vector<std::uint64_t> histogram;
  std::vector<double> per_rank_ece;  // ranks 1..k; NaN-free, 0 for empty ranks
};

/// Streaming accumulator for the full metric suite at several k at once.
///
/// All sums are exact, so any sharding of the instance stream followed by
/// merge() gives the same bits as one sequential pass. With
/// `retain_pairs == false` memory is independent of stream length and ACE is
/// not computed.
class MetricAccumulator {
 public:
  MetricAccumulator(std::vector<std::size_t> ks, std::size_t bins, bool retain_pairs = true);

  void add(const TopKPredictions& row, const GroundTruth& truth);
  void merge(const MetricAccumulator& other);

  /// One block per requested k, in ascending k. Throws "no data" when a k saw
  /// no pairs.
  std::vector<KMetrics> finish() const;

  const std::vector<std::size_t>& ks() const noexcept { return ks_; }
  std::size_t bins() const noexcept { return bins_; }

 private:
  struct PerK {
    explicit PerK(std::size_t bins) : reliability(bins) {}

    BinAccumulator reliability;
    std::uint64_t instances = 0;
    std::uint64_t pairs = 0;
    ExactSum brier;
    ExactSum nll;
    ExactSum precision;
    ExactSum ndcg;
    ExactSum outcomes;
  };

  std::vector<std::size_t> ks_;
  std::size_t bins_;
  bool retain_pairs_;
  std::vector<PerK> per_k_;
  std::vector<BinAccumulator> per_rank_;
  std::vector<CalibrationPair> pairs_;
};

}  // namespace topkcal
