#include "topkcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "topkcal/error.hpp"

namespace topkcal {

namespace {

void require_aligned(std::size_t preds, std::size_t truth) {
  if (preds != truth) {
    throw Error(ErrorKind::alignment, "alignment mismatch: " + std::to_string(truth) +
                                          " truth rows vs " + std::to_string(preds) +
                                          " prediction rows");
  }
}

void require_bins(std::size_t bins) {
  if (bins == 0) throw Error(ErrorKind::config, "bins must be positive");
}

double edge(std::size_t i, std::size_t bins) {
  return static_cast<double>(i) / static_cast<double>(bins);
}

bool pair_less(const CalibrationPair& a, const CalibrationPair& b) {
  if (a.confidence != b.confidence) return a.confidence < b.confidence;
  if (a.instance_id != b.instance_id) return a.instance_id < b.instance_id;
  return a.rank < b.rank;
}

double nll_term(double p, double y, double eps) {
  const double v = -(y * std::log(std::max(p, eps)) + (1.0 - y) * std::log(std::max(1.0 - p, eps)));
  return v > 0.0 ? v : 0.0;
}

double dcg_discount(std::size_t position) {  // position is 0-based
  return 1.0 / std::log2(static_cast<double>(position) + 2.0);
}

ReliabilityBin make_bin(double low, double high, std::uint64_t count, const ExactSum& conf,
                        const ExactSum& acc) {
  ReliabilityBin bin{low, high, count, 0.0, 0.0};
  if (count > 0) {
    const auto n = static_cast<double>(count);
    bin.mean_conf = std::clamp(conf.value() / n, low, high);
    bin.mean_acc = std::clamp(acc.value() / n, 0.0, 1.0);
  }
  return bin;
}

// Equal-mass binning over pairs already in (confidence, instance, rank) order.
template <typename Sorted>
ReliabilityBins quantile_bins(const Sorted& sorted, std::size_t bins) {
  require_bins(bins);
  const std::size_t n = sorted.size();
  const std::size_t base = n / bins;
  const std::size_t extra = n % bins;
  ReliabilityBins out;
  out.bins.reserve(bins);
  std::size_t pos = 0;
  double last_high = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    if (size == 0) {
      out.bins.push_back({last_high, last_high, 0, 0.0, 0.0});
      continue;
    }
    ExactSum conf, acc;
    for (std::size_t i = pos; i < pos + size; ++i) {
      conf.add(sorted[i]->confidence);
      acc.add(sorted[i]->outcome);
    }
    const double low = sorted[pos]->confidence;
    const double high = sorted[pos + size - 1]->confidence;
    out.bins.push_back(make_bin(low, high, size, conf, acc));
    last_high = high;
    pos += size;
  }
  return out;
}

}  // namespace

std::vector<CalibrationPair> collect_pairs(std::span<const TopKPredictions> preds,
                                           std::span<const GroundTruth> truth, std::size_t k) {
  require_aligned(preds.size(), truth.size());
  std::vector<CalibrationPair> pairs;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& entries = preds[i].entries;
    const std::size_t take = std::min(k, entries.size());
    for (std::size_t r = 0; r < take; ++r) {
      pairs.push_back({entries[r].score, truth[i].contains(entries[r].label) ? 1.0 : 0.0,
                       preds[i].instance_id, static_cast<std::uint32_t>(r + 1)});
    }
  }
  return pairs;
}

std::uint64_t ReliabilityBins::total() const noexcept {
  std::uint64_t n = 0;
  for (const auto& b : bins) n += b.count;
  return n;
}

std::size_t bin_index(double confidence, std::size_t bins) {
  if (!(confidence > 0.0)) return 0;
  if (confidence >= 1.0) return bins - 1;
  auto idx = static_cast<std::size_t>(std::ceil(confidence * static_cast<double>(bins)));
  idx = idx == 0 ? 0 : std::min(idx - 1, bins - 1);
  // The product above can land one bin off; settle against the exact edges.
  while (idx > 0 && confidence <= edge(idx, bins)) --idx;
  while (idx + 1 < bins && confidence > edge(idx + 1, bins)) ++idx;
  return idx;
}

BinAccumulator::BinAccumulator(std::size_t bins) : counts_(bins), conf_(bins), acc_(bins) {
  require_bins(bins);
}

void BinAccumulator::add(double confidence, double outcome) {
  const std::size_t b = bin_index(confidence, counts_.size());
  ++counts_[b];
  conf_[b].add(confidence);
  acc_[b].add(outcome);
}

void BinAccumulator::merge(const BinAccumulator& other) {
  if (other.bins() != bins()) throw Error(ErrorKind::config, "bin count mismatch in merge");
  for (std::size_t b = 0; b < counts_.size(); ++b) {
    counts_[b] += other.counts_[b];
    conf_[b].merge(other.conf_[b]);
    acc_[b].merge(other.acc_[b]);
  }
}

std::uint64_t BinAccumulator::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ReliabilityBins BinAccumulator::finish() const {
  ReliabilityBins out;
  const std::size_t bins = counts_.size();
  out.bins.reserve(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out.bins.push_back(make_bin(edge(b, bins), edge(b + 1, bins), counts_[b], conf_[b], acc_[b]));
  }
  return out;
}

double calibration_error(const ReliabilityBins& bins) {
  const std::uint64_t n = bins.total();
  if (n == 0) throw Error(ErrorKind::data, "no data");
  ExactSum weighted;
  for (const auto& b : bins.bins) {
    if (b.count > 0) weighted.add(static_cast<double>(b.count) * std::abs(b.mean_acc - b.mean_conf));
  }
  return weighted.value() / static_cast<double>(n);
}

EceResult ece(std::span<const CalibrationPair> pairs, std::size_t bins) {
  BinAccumulator acc(bins);
  for (const auto& p : pairs) acc.add(p.confidence, p.outcome);
  EceResult out;
  out.reliability = acc.finish();
  out.value = calibration_error(out.reliability);
  return out;
}

EceResult ece_at_k(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
                   std::size_t k, std::size_t bins) {
  const auto pairs = collect_pairs(preds, truth, k);
  return ece(pairs, bins);
}

ReliabilityBins adaptive_bins(std::span<const CalibrationPair> pairs, std::size_t bins) {
  std::vector<const CalibrationPair*> sorted;
  sorted.reserve(pairs.size());
  for (const auto& p : pairs) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(),
            [](const CalibrationPair* a, const CalibrationPair* b) { return pair_less(*a, *b); });
  return quantile_bins(sorted, bins);
}

EceResult ace(std::span<const CalibrationPair> pairs, std::size_t bins) {
  EceResult out;
  out.reliability = adaptive_bins(pairs, bins);
  out.value = calibration_error(out.reliability);
  return out;
}

EceResult ace_at_k(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
                   std::size_t k, std::size_t bins) {
  const auto pairs = collect_pairs(preds, truth, k);
  return ace(pairs, bins);
}

namespace {

template <typename OutcomeFn>
double marginal_ece_impl(const DenseScoreMatrix& probs, std::size_t bins, OutcomeFn outcome) {
  for (double v : probs.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::input, "not a probability matrix");
  }
  if (probs.rows() == 0) throw Error(ErrorKind::data, "no data");
  ExactSum total;
  for (std::size_t j = 0; j < probs.cols(); ++j) {
    BinAccumulator acc(bins);
    for (std::size_t i = 0; i < probs.rows(); ++i) acc.add(probs(i, j), outcome(i, j));
    total.add(calibration_error(acc.finish()));
  }
  return total.value();
}

}  // namespace

double marginal_ece(const DenseScoreMatrix& probs, std::span<const GroundTruth> truth,
                    std::size_t bins) {
  require_aligned(probs.rows(), truth.size());
  return marginal_ece_impl(probs, bins, [&](std::size_t i, std::size_t j) {
    return truth[i].contains(static_cast<LabelId>(j)) ? 1.0 : 0.0;
  });
}

double marginal_ece(const DenseScoreMatrix& probs, const DenseScoreMatrix& expected_outcomes,
                    std::size_t bins) {
  if (probs.rows() != expected_outcomes.rows() || probs.cols() != expected_outcomes.cols()) {
    throw Error(ErrorKind::alignment, "score and outcome matrices differ in shape");
  }
  return marginal_ece_impl(probs, bins,
                           [&](std::size_t i, std::size_t j) { return expected_outcomes(i, j); });
}

double brier(std::span<const CalibrationPair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::data, "no data");
  ExactSum sum;
  for (const auto& p : pairs) {
    const double d = p.confidence - p.outcome;
    sum.add(d * d);
  }
  return sum.value() / static_cast<double>(pairs.size());
}

double brier(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
             std::size_t k) {
  return brier(collect_pairs(preds, truth, k));
}

double base_rate(std::span<const CalibrationPair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::data, "no data");
  ExactSum sum;
  for (const auto& p : pairs) sum.add(p.outcome);
  return sum.value() / static_cast<double>(pairs.size());
}

BrierDecomposition brier_decomposition(const ReliabilityBins& bins, double base_rate) {
  const std::uint64_t n = bins.total();
  if (n == 0) throw Error(ErrorKind::data, "no data");
  ExactSum rel, res;
  for (const auto& b : bins.bins) {
    if (b.count == 0) continue;
    const auto c = static_cast<double>(b.count);
    const double dr = b.mean_conf - b.mean_acc;
    const double ds = b.mean_acc - base_rate;
    rel.add(c * dr * dr);
    res.add(c * ds * ds);
  }
  const auto total = static_cast<double>(n);
  return {rel.value() / total, res.value() / total, base_rate * (1.0 - base_rate)};
}

double nll(std::span<const CalibrationPair> pairs, double eps) {
  if (pairs.empty()) throw Error(ErrorKind::data, "no data");
  ExactSum sum;
  for (const auto& p : pairs) sum.add(nll_term(p.confidence, p.outcome, eps));
  return sum.value() / static_cast<double>(pairs.size());
}

double nll(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
           std::size_t k, double eps) {
  return nll(collect_pairs(preds, truth, k), eps);
}

double precision_at_k(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
                      std::size_t k) {
  require_aligned(preds.size(), truth.size());
  if (preds.empty()) throw Error(ErrorKind::data, "no data");
  if (k == 0) throw Error(ErrorKind::config, "k must be positive");
  ExactSum sum;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& entries = preds[i].entries;
    const std::size_t take = std::min(k, entries.size());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < take; ++r) hits += truth[i].contains(entries[r].label) ? 1 : 0;
    sum.add(static_cast<double>(hits) / static_cast<double>(k));
  }
  return sum.value() / static_cast<double>(preds.size());
}

double ndcg_at_k(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
                 std::size_t k) {
  require_aligned(preds.size(), truth.size());
  if (preds.empty()) throw Error(ErrorKind::data, "no data");
  if (k == 0) throw Error(ErrorKind::config, "k must be positive");
  ExactSum sum;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& entries = preds[i].entries;
    const std::size_t ideal_len = std::min(k, truth[i].relevant.size());
    if (ideal_len == 0) continue;
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, entries.size()); ++r) {
      if (truth[i].contains(entries[r].label)) dcg += dcg_discount(r);
    }
    for (std::size_t r = 0; r < ideal_len; ++r) idcg += dcg_discount(r);
    sum.add(dcg / idcg);
  }
  return sum.value() / static_cast<double>(preds.size());
}

std::vector<std::uint64_t> confidence_histogram(std::span<const TopKPredictions> preds,
                                                std::size_t k, std::size_t bins) {
  require_bins(bins);
  std::vector<std::uint64_t> counts(bins, 0);
  for (const auto& row : preds) {
    const std::size_t take = std::min(k, row.entries.size());
    for (std::size_t r = 0; r < take; ++r) ++counts[bin_index(row.entries[r].score, bins)];
  }
  return counts;
}

MetricAccumulator::MetricAccumulator(std::vector<std::size_t> ks, std::size_t bins,
                                     bool retain_pairs)
    : ks_(std::move(ks)), bins_(bins), retain_pairs_(retain_pairs) {
  require_bins(bins);
  if (ks_.empty()) throw Error(ErrorKind::config, "empty k set");
  std::sort(ks_.begin(), ks_.end());
  ks_.erase(std::unique(ks_.begin(), ks_.end()), ks_.end());
  if (ks_.front() == 0) throw Error(ErrorKind::config, "k must be positive");
  per_k_.reserve(ks_.size());
  for (std::size_t i = 0; i < ks_.size(); ++i) per_k_.emplace_back(bins);
  per_rank_.assign(ks_.back(), BinAccumulator(bins));
}

void MetricAccumulator::add(const TopKPredictions& row, const GroundTruth& truth) {
  const std::size_t kmax = ks_.back();
  const std::size_t avail = std::min(kmax, row.entries.size());

  // Per-rank terms, computed once and shared by every k.
  double conf[64], outcome[64], sq[64], log_loss[64];
  std::vector<double> spill;
  double* buf[4] = {conf, outcome, sq, log_loss};
  if (avail > 64) {
    spill.resize(4 * avail);
    for (int j = 0; j < 4; ++j) buf[j] = spill.data() + j * avail;
  }
  for (std::size_t r = 0; r < avail; ++r) {
    const auto& e = row.entries[r];
    const double p = e.score;
    const double y = truth.contains(e.label) ? 1.0 : 0.0;
    buf[0][r] = p;
    buf[1][r] = y;
    buf[2][r] = (p - y) * (p - y);
    buf[3][r] = nll_term(p, y, kNllEpsilon);
    per_rank_[r].add(p, y);
    if (retain_pairs_) {
      pairs_.push_back({p, y, row.instance_id, static_cast<std::uint32_t>(r + 1)});
    }
  }

  for (std::size_t i = 0; i < ks_.size(); ++i) {
    const std::size_t k = ks_[i];
    const std::size_t take = std::min(k, avail);
    auto& s = per_k_[i];
    ++s.instances;
    s.pairs += take;
    std::size_t hits = 0;
    double dcg = 0.0;
    for (std::size_t r = 0; r < take; ++r) {
      s.reliability.add(buf[0][r], buf[1][r]);
      s.brier.add(buf[2][r]);
      s.nll.add(buf[3][r]);
      s.outcomes.add(buf[1][r]);
      if (buf[1][r] > 0.0) {
        ++hits;
        dcg += dcg_discount(r);
      }
    }
    s.precision.add(static_cast<double>(hits) / static_cast<double>(k));
    const std::size_t ideal_len = std::min(k, truth.relevant.size());
    if (ideal_len > 0) {
      double idcg = 0.0;
      for (std::size_t r = 0; r < ideal_len; ++r) idcg += dcg_discount(r);
      s.ndcg.add(dcg / idcg);
    }
  }
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
  if (other.ks_ != ks_ || other.bins_ != bins_ || other.retain_pairs_ != retain_pairs_) {
    throw Error(ErrorKind::config, "incompatible accumulators in merge");
  }
  for (std::size_t i = 0; i < per_k_.size(); ++i) {
    auto& a = per_k_[i];
    const auto& b = other.per_k_[i];
    a.reliability.merge(b.reliability);
    a.instances += b.instances;
    a.pairs += b.pairs;
    a.brier.merge(b.brier);
    a.nll.merge(b.nll);
    a.precision.merge(b.precision);
    a.ndcg.merge(b.ndcg);
    a.outcomes.merge(b.outcomes);
  }
  for (std::size_t r = 0; r < per_rank_.size(); ++r) per_rank_[r].merge(other.per_rank_[r]);
  pairs_.insert(pairs_.end(), other.pairs_.begin(), other.pairs_.end());
}

std::vector<KMetrics> MetricAccumulator::finish() const {
  std::vector<const CalibrationPair*> sorted;
  if (retain_pairs_) {
    sorted.reserve(pairs_.size());
    for (const auto& p : pairs_) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(),
              [](const CalibrationPair* a, const CalibrationPair* b) { return pair_less(*a, *b); });
  }

  std::vector<KMetrics> out;
  out.reserve(ks_.size());
  for (std::size_t i = 0; i < ks_.size(); ++i) {
    const auto& s = per_k_[i];
    if (s.pairs == 0) throw Error(ErrorKind::data, "no data");
    KMetrics m;
    m.k = ks_[i];
    m.instances = s.instances;
    m.pairs = s.pairs;
    m.reliability = s.reliability.finish();
    m.ece = calibration_error(m.reliability);
    const auto n = static_cast<double>(s.pairs);
    m.brier = s.brier.value() / n;
    m.nll = s.nll.value() / n;
    m.precision = s.precision.value() / static_cast<double>(s.instances);
    m.ndcg = s.ndcg.value() / static_cast<double>(s.instances);
    m.decomposition = brier_decomposition(m.reliability, s.outcomes.value() / n);
    for (const auto& b : m.reliability.bins) m.histogram.push_back(b.count);
    for (std::size_t r = 0; r < m.k && r < per_rank_.size(); ++r) {
      const auto bins = per_rank_[r].finish();
      m.per_rank_ece.push_back(bins.total() > 0 ? calibration_error(bins) : 0.0);
    }
    if (retain_pairs_) {
      std::vector<const CalibrationPair*> subset;
      subset.reserve(s.pairs);
      for (const auto* p : sorted) {
        if (p->rank <= m.k) subset.push_back(p);
      }
      m.adaptive = quantile_bins(subset, bins_);
      m.ace = calibration_error(*m.adaptive);
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace topkcal
