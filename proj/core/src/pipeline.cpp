#include "topkcal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "topkcal/error.hpp"
#include "topkcal/topk.hpp"

namespace topkcal {

namespace {

// Unbiased draw in [0, bound). std::uniform_int_distribution is not
// specified bit-for-bit across standard libraries; the engine is.
std::uint64_t bounded(std::mt19937_64& engine, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = engine();
    if (r >= threshold) return r % bound;
  }
}

void require_aligned(std::size_t preds, std::size_t truth) {
  if (preds != truth) {
    throw Error(ErrorKind::alignment, "alignment mismatch: " + std::to_string(truth) +
                                          " truth rows vs " + std::to_string(preds) +
                                          " prediction rows");
  }
}

// Pairs from the listed instances; rank == 0 pools ranks 1..k, otherwise only
// that rank.
std::vector<ScoreOutcome> gather(std::span<const TopKPredictions> preds,
                                 std::span<const GroundTruth> truth,
                                 std::span<const std::size_t> instances, std::size_t k,
                                 std::size_t rank) {
  std::vector<ScoreOutcome> pairs;
  for (std::size_t i : instances) {
    const auto& entries = preds[i].entries;
    const std::size_t take = std::min(k, entries.size());
    for (std::size_t r = 0; r < take; ++r) {
      if (rank != 0 && r + 1 != rank) continue;
      pairs.push_back({entries[r].score, truth[i].contains(entries[r].label) ? 1.0 : 0.0});
    }
  }
  return pairs;
}

Calibrator constant_model(std::span<const ScoreOutcome> pairs) {
  double positives = 0.0;
  for (const auto& p : pairs) positives += p.outcome;
  PlattOptions defaults;
  const double rate = std::clamp(positives / static_cast<double>(pairs.size()), defaults.min_rate,
                                 1.0 - defaults.min_rate);
  return {PlattModel{0.0, -std::log(rate / (1.0 - rate))}, ScoreDomain::logit};
}

Calibrator fit_one(CalibrationMethod method, std::span<const ScoreOutcome> pairs, std::size_t fold,
                   std::size_t rank, std::vector<RecalibrationWarning>& warnings) {
  auto fit = fit_calibrator(method, pairs);
  if (method == CalibrationMethod::platt && fit.single_class) {
    warnings.push_back({fold, rank, "single outcome class; using constant model"});
  }
  if (!fit.calibrator.is_non_decreasing()) {
    warnings.push_back({fold, rank, "fitted map is decreasing; using constant model"});
    return constant_model(pairs);
  }
  return fit.calibrator;
}

struct FittedModels {
  CalibrationMode mode;
  std::vector<Calibrator> models;
};

FittedModels fit_models(std::span<const TopKPredictions> preds, std::span<const GroundTruth> truth,
                        std::span<const std::size_t> instances, const CalibrationConfig& config,
                        std::size_t fold, std::vector<RecalibrationWarning>& warnings) {
  if (config.k == 0) throw Error(ErrorKind::config, "k must be positive");
  FittedModels out{config.mode, {}};
  if (config.mode == CalibrationMode::joint) {
    const auto pairs = gather(preds, truth, instances, config.k, 0);
    out.models.push_back(fit_one(config.method, pairs, fold, 0, warnings));
    return out;
  }
  for (std::size_t r = 1; r <= config.k; ++r) {
    const auto pairs = gather(preds, truth, instances, config.k, r);
    if (pairs.empty()) throw Error(ErrorKind::data, "empty rank slice");
    out.models.push_back(fit_one(config.method, pairs, fold, r, warnings));
  }
  return out;
}

TopKPredictions apply_models(const FittedModels& fitted, const TopKPredictions& row) {
  return fitted.mode == CalibrationMode::joint ? apply_joint(fitted.models.front(), row)
                                               : apply_separate(fitted.models, row);
}

std::vector<std::size_t> all_positions(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

FoldAssignment FoldAssignment::make(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::config, "folds must be at least 2");
  if (n < folds) {
    throw Error(ErrorKind::config, "fewer instances (" + std::to_string(n) + ") than folds (" +
                                       std::to_string(folds) + ")");
  }
  std::vector<std::size_t> perm = all_positions(n);
  std::mt19937_64 engine(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[bounded(engine, i)]);
  }
  FoldAssignment out{folds, seed, std::vector<std::uint32_t>(n)};
  for (std::size_t pos = 0; pos < n; ++pos) {
    out.fold_of[perm[pos]] = static_cast<std::uint32_t>(pos % folds);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::members(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::sizes() const {
  std::vector<std::size_t> out(folds, 0);
  for (auto f : fold_of) ++out[f];
  return out;
}

Calibrator joint_calibrate(std::span<const TopKPredictions> preds,
                           std::span<const GroundTruth> truth, CalibrationMethod method,
                           std::size_t k) {
  require_aligned(preds.size(), truth.size());
  std::vector<RecalibrationWarning> warnings;
  const auto idx = all_positions(preds.size());
  return fit_models(preds, truth, idx, {method, CalibrationMode::joint, k, 2, 0}, 0, warnings)
      .models.front();
}

std::vector<Calibrator> separate_calibrate(std::span<const TopKPredictions> preds,
                                           std::span<const GroundTruth> truth,
                                           CalibrationMethod method, std::size_t k) {
  require_aligned(preds.size(), truth.size());
  std::vector<RecalibrationWarning> warnings;
  const auto idx = all_positions(preds.size());
  return fit_models(preds, truth, idx, {method, CalibrationMode::separate, k, 2, 0}, 0, warnings)
      .models;
}

TopKPredictions apply_joint(const Calibrator& model, const TopKPredictions& row) {
  TopKPredictions out = row;
  for (auto& e : out.entries) e.score = model(e.score);
  return out;
}

TopKPredictions apply_separate(std::span<const Calibrator> models, const TopKPredictions& row) {
  if (models.empty()) throw Error(ErrorKind::config, "no calibrators");
  TopKPredictions out = row;
  for (std::size_t r = 0; r < out.entries.size(); ++r) {
    out.entries[r].score = models[std::min(r, models.size() - 1)](out.entries[r].score);
  }
  // Ties created by the maps keep their previous rank order, as in joint mode.
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });
  return out;
}

RecalibrationResult kfold_recalibrate(std::span<const TopKPredictions> preds,
                                      std::span<const GroundTruth> truth,
                                      const CalibrationConfig& config) {
  require_aligned(preds.size(), truth.size());
  const auto folds = FoldAssignment::make(preds.size(), config.folds, config.seed);

  RecalibrationResult result;
  result.rows.resize(preds.size());
  for (std::size_t f = 0; f < config.folds; ++f) {
    std::vector<std::size_t> train;
    train.reserve(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (folds.fold_of[i] != f) train.push_back(i);
    }
    const auto fitted = fit_models(preds, truth, train, config, f, result.warnings);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (folds.fold_of[i] == f) result.rows[i] = apply_models(fitted, preds[i]);
    }
  }
  return result;
}

RecalibrationResult split_recalibrate(std::span<const TopKPredictions> calib_preds,
                                      std::span<const GroundTruth> calib_truth,
                                      std::span<const TopKPredictions> target,
                                      const CalibrationConfig& config) {
  require_aligned(calib_preds.size(), calib_truth.size());
  RecalibrationResult result;
  const auto idx = all_positions(calib_preds.size());
  const auto fitted = fit_models(calib_preds, calib_truth, idx, config, 0, result.warnings);
  result.rows.reserve(target.size());
  for (const auto& row : target) result.rows.push_back(apply_models(fitted, row));
  return result;
}

const KMetrics* MetricReport::block(std::size_t k) const {
  for (const auto& b : blocks) {
    if (b.k == k) return &b;
  }
  return nullptr;
}

MetricReport evaluate_report(std::span<const TopKPredictions> preds,
                             std::span<const GroundTruth> truth, std::vector<std::size_t> ks,
                             const EvaluateOptions& options) {
  require_aligned(preds.size(), truth.size());
  if (ks.empty()) throw Error(ErrorKind::config, "empty k set");

  constexpr std::size_t kMinShard = 16384;
  std::size_t threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, preds.size() / kMinShard));

  std::vector<MetricAccumulator> shards(threads,
                                        MetricAccumulator(ks, options.bins, options.adaptive));
  auto run = [&](std::size_t s) {
    const std::size_t begin = preds.size() * s / threads;
    const std::size_t end = preds.size() * (s + 1) / threads;
    for (std::size_t i = begin; i < end; ++i) shards[s].add(preds[i], truth[i]);
  };
  if (threads == 1) {
    run(0);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t s = 0; s < threads; ++s) workers.emplace_back(run, s);
  }
  for (std::size_t s = 1; s < threads; ++s) shards[0].merge(shards[s]);

  MetricReport report;
  report.bins = options.bins;
  report.blocks = shards[0].finish();
  return report;
}

std::vector<MetricDelta> report_deltas(const MetricReport& baseline, const MetricReport& current) {
  std::vector<MetricDelta> out;
  for (const auto& cur : current.blocks) {
    const KMetrics* base = baseline.block(cur.k);
    if (!base) continue;
    MetricDelta d;
    d.k = cur.k;
    d.ece = cur.ece - base->ece;
    if (cur.ace && base->ace) d.ace = *cur.ace - *base->ace;
    d.brier = cur.brier - base->brier;
    d.nll = cur.nll - base->nll;
    d.precision = cur.precision - base->precision;
    d.ndcg = cur.ndcg - base->ndcg;
    out.push_back(d);
  }
  return out;
}

}  // namespace topkcal
