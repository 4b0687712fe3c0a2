#include "topkcal/topk.hpp"

#include <algorithm>
#include <cmath>

#include "topkcal/error.hpp"

namespace topkcal {

std::vector<ScoredLabel> select_top_k(std::span<const ScoredLabel> row, std::size_t k) {
  if (row.empty()) throw Error(ErrorKind::data, "empty candidate set");
  if (k == 0) throw Error(ErrorKind::config, "k must be positive");
  for (const auto& e : row) {
    if (!std::isfinite(e.score)) throw Error(ErrorKind::input, "non-finite score");
  }
  std::vector<ScoredLabel> out(row.begin(), row.end());
  const std::size_t take = std::min(k, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(take), out.end(),
                    ranks_before);
  out.resize(take);
  return out;
}

void sort_ranked(std::vector<ScoredLabel>& entries) {
  std::sort(entries.begin(), entries.end(), ranks_before);
}

bool is_ranked(std::span<const ScoredLabel> entries) noexcept {
  return std::is_sorted(entries.begin(), entries.end(), ranks_before);
}

double sigmoid_link(double score) noexcept {
  if (score >= 0.0) return 1.0 / (1.0 + std::exp(-score));
  const double e = std::exp(score);
  return e / (1.0 + e);
}

double clamped_logit(double p) noexcept {
  if (!(p > 0.0)) return -kLogitClamp;
  if (!(p < 1.0)) return kLogitClamp;
  return std::clamp(std::log(p) - std::log1p(-p), -kLogitClamp, kLogitClamp);
}

MinMaxSquash fit_minmax(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorKind::data, "degenerate score range");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (!(*hi > *lo)) throw Error(ErrorKind::data, "degenerate score range");
  return {*lo, *hi};
}

double minmax_squash(double score, const MinMaxSquash& range) {
  if (!(range.max > range.min)) throw Error(ErrorKind::config, "degenerate score range");
  return std::clamp((score - range.min) / (range.max - range.min), 0.0, 1.0);
}

}  // namespace topkcal
