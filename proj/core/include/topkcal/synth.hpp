#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "topkcal/metrics.hpp"
#include "topkcal/types.hpp"

namespace topkcal {

struct WorldParams {
  std::size_t n = 1000;
  std::size_t m = 1000;
  std::size_t k = 5;
  double tail_exponent = 1.1;
  std::uint64_t seed = 0;
};

/// Instances with known conditional label probabilities and labels sampled
/// from them. Every instance has a candidate pool of labels with nonzero
/// conditional probability; all other labels have probability zero.
struct SyntheticWorld {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t k = 0;
  double tail_exponent = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> offsets;        // n + 1 offsets into `conditionals`
  std::vector<ScoredLabel> conditionals;   // per instance, in ranking order
  std::vector<GroundTruth> truth;          // sampled independently per label

  std::span<const ScoredLabel> pool(std::size_t instance) const {
    return {conditionals.data() + offsets[instance], offsets[instance + 1] - offsets[instance]};
  }

  /// True conditional probability of `label` for `instance` (0 off-pool).
  double conditional(std::size_t instance, LabelId label) const;
};

/// Power-law label priors with the given exponent; about five expected
/// positives per instance. Deterministic in the seed, and identical for any
/// `threads` value since each instance draws from its own substream.
SyntheticWorld generate_world(const WorldParams& params, std::size_t threads = 1);

/// World from explicit conditionals (one list per instance); labels are
/// sampled with per-instance substreams of `seed`.
SyntheticWorld make_world(const std::vector<std::vector<ScoredLabel>>& conditionals,
                          std::size_t m, std::size_t k, std::uint64_t seed);

/// Parametric miscalibration applied to the true conditionals.
struct Distortion {
  enum class Kind { identity, temperature, midrange, softmax_normalize };

  Kind kind = Kind::identity;
  double parameter = 1.0;  // temperature T or midrange exponent gamma

  static Distortion identity() { return {Kind::identity, 1.0}; }
  static Distortion temperature(double t);
  static Distortion midrange(double gamma);
  static Distortion softmax_normalize() { return {Kind::softmax_normalize, 1.0}; }

  /// "identity", "temperature:T", "midrange:G", "softmax_normalize" (or "softmax").
  static Distortion parse(const std::string& text);
  std::string to_string() const;
};

/// Per-probability map for identity, temperature and midrange distortions.
/// Temperature divides the clamped logit by T; midrange maps
/// p -> 0.5 + sign(p-0.5) |p-0.5|^g 0.5^(1-g).
double distort_probability(double p, const Distortion& d);

/// Distorted scores for each instance's pool, reduced to the top k.
std::vector<TopKPredictions> distort(const SyntheticWorld& world, const Distortion& d);

/// Pairs whose outcomes are the true conditionals instead of sampled labels.
/// Rows must reference world instances by instance_id.
std::vector<CalibrationPair> expected_pairs(const SyntheticWorld& world,
                                                   std::span<const TopKPredictions> dump,
                                                   std::size_t k);

/// Binned top-k calibration error with exact conditionals as outcomes.
double analytic_ece(const SyntheticWorld& world, std::span<const TopKPredictions> dump,
                    std::size_t k, std::size_t bins = 10);

}  // namespace topkcal
