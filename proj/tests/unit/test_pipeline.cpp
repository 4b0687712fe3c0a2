#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "topkcal/error.hpp"
#include "topkcal/pipeline.hpp"
#include "topkcal/synth.hpp"
#include "topkcal/topk.hpp"

using namespace topkcal;

namespace {

// Both instances put a wrong label first at 0.6 and a right label second at
// 0.5, so per-rank maps send rank 1 to 0 and rank 2 to 1.
void rank_crossing(std::vector<TopKPredictions>& preds, std::vector<GroundTruth>& truth) {
  preds = {{0, {{10, 0.6}, {20, 0.5}}}, {1, {{11, 0.6}, {21, 0.5}}}};
  truth = {{0, {20}}, {1, {21}}};
}

struct World {
  SyntheticWorld world;
  std::vector<TopKPredictions> dump;
};

const World& temperature_world() {
  static const World w = [] {
    World out{generate_world({100000, 1000, 5, 1.1, 7}), {}};
    out.dump = distort(out.world, Distortion::temperature(0.5));
    return out;
  }();
  return w;
}

}  // namespace

TEST(Folds, PartitionProperties) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 200; ++t) {
    const std::size_t folds = 2 + rng() % 9;
    const std::size_t n = folds + rng() % 500;
    const std::uint64_t seed = rng();
    auto a = FoldAssignment::make(n, folds, seed);
    ASSERT_EQ(a.fold_of.size(), n);
    auto sizes = a.sizes();
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1u);
    std::set<std::size_t> seen;
    for (std::size_t f = 0; f < folds; ++f) {
      for (auto i : a.members(f)) EXPECT_TRUE(seen.insert(i).second);
    }
    EXPECT_EQ(seen.size(), n);
    EXPECT_EQ(FoldAssignment::make(n, folds, seed).fold_of, a.fold_of);
  }
}

TEST(Folds, SeedShuffles) {
  auto a = FoldAssignment::make(1000, 5, 1);
  auto b = FoldAssignment::make(1000, 5, 2);
  EXPECT_NE(a.fold_of, b.fold_of);
  // Not contiguous blocks.
  EXPECT_FALSE(std::is_sorted(a.fold_of.begin(), a.fold_of.end()));
}

TEST(Folds, Errors) {
  EXPECT_THROW(FoldAssignment::make(10, 1, 0), Error);
  EXPECT_THROW(FoldAssignment::make(3, 4, 0), Error);
}

TEST(Joint, PooledPairCount) {
  std::vector<TopKPredictions> preds{{0, {{1, 0.9}, {2, 0.2}}}, {1, {{1, 0.4}}}, {2, {{3, 0.6}, {4, 0.5}, {5, 0.1}}}};
  std::vector<GroundTruth> truth{{0, {1}}, {1, {}}, {2, {4}}};
  // Pooled pairs at k=2: 2 + 1 + 2; the isotonic model covers the same scores.
  auto model = joint_calibrate(preds, truth, CalibrationMethod::isotonic, 2);
  const auto& iso = std::get<IsotonicModel>(model.model);
  EXPECT_EQ(iso.thresholds.front(), 0.2);
  EXPECT_EQ(collect_pairs(preds, truth, 2).size(), 5u);
}

TEST(Joint, OverconfidentMapBelowDiagonal) {
  const auto& w = temperature_world();
  auto model = joint_calibrate(w.dump, w.world.truth, CalibrationMethod::isotonic, 5);
  EXPECT_TRUE(model.is_non_decreasing());
  for (double p : {0.8, 0.9, 0.95, 0.99}) {
    EXPECT_LT(model(p), p) << p;
    const double inverse = sigmoid_link(0.5 * clamped_logit(p));
    EXPECT_NEAR(model(p), inverse, 0.05) << p;
  }
}

TEST(Joint, IsotonicRecoversInverseDistortion) {
  const auto& w = temperature_world();
  auto model = joint_calibrate(w.dump, w.world.truth, CalibrationMethod::isotonic, 5);
  double dev = 0.0;
  std::size_t count = 0;
  for (const auto& row : w.dump) {
    for (const auto& e : row.entries) {
      dev += std::abs(model(e.score) - sigmoid_link(0.5 * clamped_logit(e.score)));
      ++count;
    }
  }
  EXPECT_LE(dev / static_cast<double>(count), 0.02);
}

TEST(Separate, EmptyRankSlice) {
  std::vector<TopKPredictions> preds{{0, {{1, 0.9}}}, {1, {{2, 0.4}}}};
  std::vector<GroundTruth> truth{{0, {1}}, {1, {}}};
  try {
    separate_calibrate(preds, truth, CalibrationMethod::isotonic, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty rank slice");
  }
}

TEST(Separate, RankCrossingChangesPrecision) {
  std::vector<TopKPredictions> preds;
  std::vector<GroundTruth> truth;
  rank_crossing(preds, truth);
  const double before = precision_at_k(preds, truth, 1);

  auto models = separate_calibrate(preds, truth, CalibrationMethod::isotonic, 2);
  std::vector<TopKPredictions> sep;
  for (const auto& row : preds) sep.push_back(apply_separate(models, row));
  EXPECT_EQ(sep[0].entries[0].label, 20u);
  EXPECT_NE(precision_at_k(sep, truth, 1), before);

  auto joint = joint_calibrate(preds, truth, CalibrationMethod::isotonic, 2);
  std::vector<TopKPredictions> jnt;
  for (const auto& row : preds) jnt.push_back(apply_joint(joint, row));
  EXPECT_EQ(jnt[0].entries[0].label, 10u);
  EXPECT_EQ(precision_at_k(jnt, truth, 1), before);
}

TEST(Separate, IdenticalMapsMatchJoint) {
  const auto& w = temperature_world();
  auto joint = joint_calibrate(w.dump, w.world.truth, CalibrationMethod::isotonic, 5);
  std::vector<Calibrator> same(5, joint);
  std::vector<TopKPredictions> a, b;
  for (std::size_t i = 0; i < 2000; ++i) {
    a.push_back(apply_joint(joint, w.dump[i]));
    b.push_back(apply_separate(same, w.dump[i]));
  }
  std::span<const GroundTruth> truth(w.world.truth.data(), 2000);
  auto ra = evaluate_report(a, truth, {1, 3, 5});
  auto rb = evaluate_report(b, truth, {1, 3, 5});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(ra.blocks[i].ece, rb.blocks[i].ece);
    EXPECT_EQ(ra.blocks[i].precision, rb.blocks[i].precision);
    EXPECT_EQ(ra.blocks[i].ndcg, rb.blocks[i].ndcg);
    EXPECT_EQ(ra.blocks[i].brier, rb.blocks[i].brier);
  }
}

TEST(Separate, KEqualsOneIsJoint) {
  const auto& w = temperature_world();
  auto joint = joint_calibrate(w.dump, w.world.truth, CalibrationMethod::isotonic, 1);
  auto sep = separate_calibrate(w.dump, w.world.truth, CalibrationMethod::isotonic, 1);
  ASSERT_EQ(sep.size(), 1u);
  EXPECT_EQ(sep[0], joint);
}

TEST(KFold, TemperatureWorldRecalibrates) {
  const auto& w = temperature_world();
  CalibrationConfig config;
  auto result = kfold_recalibrate(w.dump, w.world.truth, config);
  ASSERT_EQ(result.rows.size(), w.dump.size());
  auto pre = evaluate_report(w.dump, w.world.truth, {1, 3, 5});
  auto post = evaluate_report(result.rows, w.world.truth, {1, 3, 5});
  EXPECT_GT(pre.block(5)->ece, 0.10);
  EXPECT_LT(post.block(5)->ece, 0.01);
  for (const auto& d : report_deltas(pre, post)) {
    EXPECT_EQ(d.precision, 0.0);
    EXPECT_EQ(d.ndcg, 0.0);
  }
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& row = result.rows[i];
    EXPECT_EQ(row.instance_id, w.dump[i].instance_id);
    // Non-increasing; ties the map creates keep the original order.
    for (std::size_t r = 1; r < row.entries.size(); ++r) {
      EXPECT_GE(row.entries[r - 1].score, row.entries[r].score);
    }
    for (std::size_t r = 0; r < row.entries.size(); ++r) {
      EXPECT_EQ(row.entries[r].label, w.dump[i].entries[r].label);
      EXPECT_GE(row.entries[r].score, 0.0);
      EXPECT_LE(row.entries[r].score, 1.0);
    }
  }

  // A second pass has nothing left to correct.
  auto twice = kfold_recalibrate(result.rows, w.world.truth, config);
  auto post2 = evaluate_report(twice.rows, w.world.truth, {5});
  EXPECT_NEAR(post2.block(5)->ece, post.block(5)->ece, 0.005);
}

TEST(KFold, CalibratedInputStaysCalibrated) {
  auto world = generate_world({100000, 1000, 5, 1.1, 3});
  auto dump = distort(world, Distortion::identity());
  auto pre = evaluate_report(dump, world.truth, {5});
  auto post = evaluate_report(kfold_recalibrate(dump, world.truth, {}).rows, world.truth, {5});
  // Sampling noise of ECE@5 at this size is a few tenths of a percent.
  EXPECT_LT(post.block(5)->ece, std::max(2.0 * pre.block(5)->ece, 0.005));
}

TEST(KFold, LeaveOneOut) {
  std::vector<TopKPredictions> preds;
  std::vector<GroundTruth> truth;
  for (std::uint64_t i = 0; i < 10; ++i) {
    preds.push_back({i, {{1, 0.1 * static_cast<double>(i % 5) + 0.3}, {2, 0.2}}});
    truth.push_back({i, i % 2 ? std::vector<LabelId>{1} : std::vector<LabelId>{}});
  }
  auto folds = FoldAssignment::make(10, 10, 0);
  for (std::size_t f = 0; f < 10; ++f) EXPECT_EQ(folds.members(f).size(), 1u);
  auto result = kfold_recalibrate(preds, truth, {CalibrationMethod::isotonic, CalibrationMode::joint, 2, 10, 0});
  EXPECT_EQ(result.rows.size(), 10u);
}

TEST(KFold, PlattSingleClassWarns) {
  std::vector<TopKPredictions> preds;
  std::vector<GroundTruth> truth;
  for (std::uint64_t i = 0; i < 20; ++i) {
    preds.push_back({i, {{1, 0.5 + 0.01 * static_cast<double>(i)}}});
    truth.push_back({i, {}});
  }
  auto result = kfold_recalibrate(preds, truth, {CalibrationMethod::platt, CalibrationMode::joint, 1, 4, 0});
  ASSERT_FALSE(result.warnings.empty());
  EXPECT_EQ(result.warnings[0].message, "single outcome class; using constant model");
  for (const auto& row : result.rows) EXPECT_NEAR(row.entries[0].score, 1e-6, 1e-12);
}

TEST(KFold, RequiresEnoughInstances) {
  std::vector<TopKPredictions> preds{{0, {{1, 0.5}}}};
  std::vector<GroundTruth> truth{{0, {1}}};
  EXPECT_THROW(kfold_recalibrate(preds, truth, {}), Error);
}

TEST(Report, ThreeBlocksAndCounterexample) {
  const auto& w = temperature_world();
  std::span<const TopKPredictions> few(w.dump.data(), 1000);
  std::span<const GroundTruth> truth(w.world.truth.data(), 1000);
  auto report = evaluate_report(few, truth, {5, 1, 3});
  ASSERT_EQ(report.blocks.size(), 3u);
  EXPECT_EQ(report.blocks[0].k, 1u);
  EXPECT_EQ(report.blocks[2].k, 5u);
  EXPECT_THROW(evaluate_report(few, truth, {}), Error);

  auto fixture = oracle::replicated_counterexample();
  auto c = evaluate_report(fixture.preds, fixture.truth, {1});
  EXPECT_NEAR(c.block(1)->ece * 100.0, 5.0, 1e-9);
}

TEST(Report, ThreadCountDoesNotChangeBits) {
  const auto& w = temperature_world();
  auto one = evaluate_report(w.dump, w.world.truth, {1, 5}, {10, 1, true});
  auto many = evaluate_report(w.dump, w.world.truth, {1, 5}, {10, 4, true});
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(one.blocks[i].ece, many.blocks[i].ece);
    EXPECT_EQ(*one.blocks[i].ace, *many.blocks[i].ace);
    EXPECT_EQ(one.blocks[i].nll, many.blocks[i].nll);
    EXPECT_EQ(one.blocks[i].brier, many.blocks[i].brier);
    EXPECT_EQ(one.blocks[i].ndcg, many.blocks[i].ndcg);
  }
}

TEST(Report, Deltas) {
  std::vector<TopKPredictions> preds{{0, {{1, 0.9}}}, {1, {{1, 0.2}}}};
  std::vector<GroundTruth> truth{{0, {1}}, {1, {}}};
  auto base = evaluate_report(preds, truth, {1, 3});
  auto shifted = preds;
  shifted[0].entries[0].score = 1.0;
  auto cur = evaluate_report(shifted, truth, {1});
  auto d = report_deltas(base, cur);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].k, 1u);
  EXPECT_NEAR(d[0].brier, (0.0 + 0.04) / 2 - (0.01 + 0.04) / 2, 1e-15);
}

TEST(Split, AppliesCalibrationSplitModel) {
  const auto& w = temperature_world();
  std::span<const TopKPredictions> calib(w.dump.data(), 50000);
  std::span<const GroundTruth> calib_truth(w.world.truth.data(), 50000);
  std::span<const TopKPredictions> target(w.dump.data() + 50000, 50000);
  auto result = split_recalibrate(calib, calib_truth, target, {});
  std::span<const GroundTruth> target_truth(w.world.truth.data() + 50000, 50000);
  EXPECT_LT(evaluate_report(result.rows, target_truth, {5}).block(5)->ece, 0.01);
}
