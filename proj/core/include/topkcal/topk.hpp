#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "topkcal/types.hpp"

namespace topkcal {

/// Ranking order used everywhere: higher score first, then lower label id.
inline bool ranks_before(const ScoredLabel& a, const ScoredLabel& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.label < b.label;
}

/// The k highest-scoring entries of `row` in ranking order. Returns all of
/// them when the row holds fewer than k. Throws on an empty row, k == 0, or
/// non-finite scores.
std::vector<ScoredLabel> select_top_k(std::span<const ScoredLabel> row, std::size_t k);

/// Sorts entries into ranking order in place.
void sort_ranked(std::vector<ScoredLabel>& entries);

/// True when entries are in ranking order.
bool is_ranked(std::span<const ScoredLabel> entries) noexcept;

/// 1 / (1 + exp(-score)), evaluated without overflow.
double sigmoid_link(double score) noexcept;

/// Largest |logit| produced by `clamped_logit`; sigmoid saturates near
/// unit roundoff beyond it.
inline constexpr double kLogitClamp = 36.7;

/// ln(p / (1 - p)) clamped to [-kLogitClamp, kLogitClamp].
double clamped_logit(double p) noexcept;

/// Global min/max over all provided scores. Throws "degenerate score range"
/// when every score is equal, or when no score is given.
MinMaxSquash fit_minmax(std::span<const double> scores);

/// (score - min) / (max - min), clamped to [0,1]. Throws when max <= min.
double minmax_squash(double score, const MinMaxSquash& range);

}  // namespace topkcal
