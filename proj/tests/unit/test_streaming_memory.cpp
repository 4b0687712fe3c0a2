#include <gtest/gtest.h>

#include "alloc_tracking.hpp"
#include "line_source.hpp"
#include "topkcal/ingest.hpp"
#include "topkcal/metrics.hpp"

using namespace topkcal;

namespace {

struct StreamRun {
  std::size_t peak = 0;
  double ece = 0.0;
  std::uint64_t rows = 0;
};

StreamRun stream(std::uint64_t lines) {
  testsupport::reset_peak();
  const std::size_t before = testsupport::live_bytes();
  StreamRun out;
  {
    testsupport::LineSource truth_src(lines, 5, true);
    testsupport::LineSource pred_src(lines, 5, false);
    std::istream truth_in(&truth_src);
    std::istream pred_in(&pred_src);
    RepoReader truth(truth_in);
    PredictionReader preds(pred_in);
    MetricAccumulator acc({1, 3, 5}, 10, false);
    TopKPredictions row;
    while (preds.next(row)) {
      auto gt = truth.next();
      EXPECT_TRUE(gt.has_value());
      acc.add(row, *gt);
    }
    EXPECT_FALSE(truth.next().has_value());
    out.ece = acc.finish().back().ece;
    out.rows = preds.rows_read();
  }
  out.peak = testsupport::peak_bytes() - before;
  return out;
}

}  // namespace

TEST(StreamingMemory, PeakIndependentOfLength) {
  const auto small = stream(100000);
  const auto large = stream(1000000);
  EXPECT_EQ(small.rows, 100000u);
  EXPECT_EQ(large.rows, 1000000u);
  EXPECT_GT(small.ece, 0.0);
  // Ten times the lines, same allocation high-water mark (a few KB of slack
  // for line buffers that grew on a longer line).
  EXPECT_LE(large.peak, small.peak + 4096);
  EXPECT_LT(large.peak, std::size_t{1} << 20);
}

TEST(StreamingMemory, TrackerSeesAllocations) {
  testsupport::reset_peak();
  const std::size_t before = testsupport::live_bytes();
  auto* block = new std::vector<char>(1 << 16);
  EXPECT_GE(testsupport::live_bytes() - before, std::size_t{1} << 16);
  delete block;
  EXPECT_EQ(testsupport::live_bytes(), before);
}
