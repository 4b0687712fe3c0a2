#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "topkcal/error.hpp"
#include "topkcal/topk.hpp"

using namespace topkcal;

namespace {

std::vector<ScoredLabel> row(std::initializer_list<std::pair<LabelId, double>> items) {
  std::vector<ScoredLabel> out;
  for (auto [l, s] : items) out.push_back({l, s});
  return out;
}

}  // namespace

TEST(SelectTopK, TieBreaksByAscendingLabel) {
  auto top = select_top_k(row({{0, 0.2}, {1, 0.9}, {2, 0.9}}), 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].label, 1u);
  EXPECT_EQ(top[1].label, 2u);
}

TEST(SelectTopK, FewerCandidatesThanK) {
  auto top = select_top_k(row({{5, 0.3}}), 3);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].label, 5u);
  EXPECT_EQ(top[0].score, 0.3);
}

TEST(SelectTopK, PicksHighest) {
  auto top = select_top_k(row({{0, 0.1}, {1, 0.5}, {2, 0.3}}), 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].label, 1u);
  EXPECT_EQ(top[1].label, 2u);
}

TEST(SelectTopK, Errors) {
  std::vector<ScoredLabel> empty;
  try {
    select_top_k(empty, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty candidate set");
  }
  EXPECT_THROW(select_top_k(row({{0, 0.5}}), 0), Error);
  EXPECT_THROW(select_top_k(row({{0, std::nan("")}}), 1), Error);
}

TEST(SelectTopK, MatchesFullStableSort) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t len = 1 + rng() % 1000;
    std::vector<ScoredLabel> r;
    for (std::size_t j = 0; j < len; ++j) {
      // Coarse scores so ties are common.
      r.push_back({static_cast<LabelId>(j), static_cast<double>(rng() % 50) / 49.0});
    }
    std::shuffle(r.begin(), r.end(), rng);
    const std::size_t k = 1 + rng() % 20;
    auto sorted = r;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.label < b.label; });
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    sorted.resize(std::min(k, len));
    auto top = select_top_k(r, k);
    ASSERT_EQ(top.size(), sorted.size());
    for (std::size_t i = 0; i < top.size(); ++i) {
      EXPECT_EQ(top[i].label, sorted[i].label);
      EXPECT_EQ(top[i].score, sorted[i].score);
    }
    EXPECT_TRUE(is_ranked(top));
  }
}

TEST(Sigmoid, Values) {
  EXPECT_EQ(sigmoid_link(0.0), 0.5);
  EXPECT_NEAR(sigmoid_link(50.0), 1.0, 1e-15);
  EXPECT_NEAR(sigmoid_link(std::log(3.0)), 0.75, 1e-15);
  EXPECT_GE(sigmoid_link(-1000.0), 0.0);
  EXPECT_LE(sigmoid_link(1000.0), 1.0);
}

TEST(Sigmoid, SymmetryAndMonotonicity) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> wide(0.0, 20.0);
  for (int i = 0; i < 10000; ++i) {
    const double s = wide(rng);
    EXPECT_NEAR(sigmoid_link(s) + sigmoid_link(-s), 1.0, 1e-12);
    const double t = s + std::abs(wide(rng)) + 1e-3;
    EXPECT_LE(sigmoid_link(s), sigmoid_link(t));
  }
}

TEST(ClampedLogit, InvertsSigmoidAndClamps) {
  for (double p : {0.01, 0.2, 0.5, 0.77, 0.999}) {
    EXPECT_NEAR(sigmoid_link(clamped_logit(p)), p, 1e-12);
  }
  EXPECT_EQ(clamped_logit(0.0), -kLogitClamp);
  EXPECT_EQ(clamped_logit(1.0), kLogitClamp);
}

TEST(MinMax, Endpoints) {
  MinMaxSquash r{0.0, 10.0};
  EXPECT_EQ(minmax_squash(0.0, r), 0.0);
  EXPECT_EQ(minmax_squash(10.0, r), 1.0);
  EXPECT_EQ(minmax_squash(12.0, r), 1.0);
  EXPECT_EQ(minmax_squash(-1.0, r), 0.0);
  EXPECT_EQ(minmax_squash(0.0, MinMaxSquash{-2.0, 2.0}), 0.5);
}

TEST(MinMax, Degenerate) {
  try {
    minmax_squash(1.0, MinMaxSquash{1.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "degenerate score range");
  }
  std::vector<double> same{2.0, 2.0};
  EXPECT_THROW(fit_minmax(same), Error);
}

TEST(MinMax, FitIsGlobal) {
  std::vector<double> scores{-3.0, 1.5, 7.0, 0.0};
  auto r = fit_minmax(scores);
  EXPECT_EQ(r.min, -3.0);
  EXPECT_EQ(r.max, 7.0);
}

TEST(MinMax, TopKSetInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-4.0, 9.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredLabel> raw;
    std::vector<double> all;
    for (LabelId j = 0; j < 60; ++j) {
      raw.push_back({j, u(rng)});
      all.push_back(raw.back().score);
    }
    const auto range = fit_minmax(all);
    std::vector<ScoredLabel> squashed = raw;
    for (auto& e : squashed) e.score = minmax_squash(e.score, range);
    auto a = select_top_k(raw, 7);
    auto b = select_top_k(squashed, 7);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].label, b[i].label);
  }
}

TEST(ErrorText, LineSuffix) {
  EXPECT_EQ(at_line("bad label token", 4), "bad label token (line 4)");
}
