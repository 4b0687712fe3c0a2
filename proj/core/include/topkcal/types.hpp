#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace topkcal {

/// Index into a label space of size m.
using LabelId = std::uint32_t;
using InstanceId = std::uint64_t;

/// A (label, score) pair. Inside TopKPredictions the score is a probability.
struct ScoredLabel {
  LabelId label = 0;
  double score = 0.0;

  friend bool operator==(const ScoredLabel&, const ScoredLabel&) = default;
};

/// Ranked shortlist for one instance: non-increasing by score, ties by
/// ascending label id, distinct labels, scores in [0,1].
struct TopKPredictions {
  InstanceId instance_id = 0;
  std::vector<ScoredLabel> entries;

  friend bool operator==(const TopKPredictions&, const TopKPredictions&) = default;
};

/// Relevant labels of one instance, kept sorted and duplicate-free.
struct GroundTruth {
  InstanceId instance_id = 0;
  std::vector<LabelId> relevant;

  bool contains(LabelId label) const {
    return std::binary_search(relevant.begin(), relevant.end(), label);
  }

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// Row-major n x m matrix of finite scores. Only meant for small label spaces.
class DenseScoreMatrix {
 public:
  DenseScoreMatrix() = default;
  DenseScoreMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Affine map of raw scores onto [0,1]; max > min.
struct MinMaxSquash {
  double min = 0.0;
  double max = 1.0;

  friend bool operator==(const MinMaxSquash&, const MinMaxSquash&) = default;
};

}  // namespace topkcal
