#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "topkcal/metrics.hpp"
#include "topkcal/pipeline.hpp"

namespace topkcal::cli {

using Json = nlohmann::ordered_json;

/// Calibration and ranking metrics are emitted in percent; NLL in nats;
/// reliability tables in probability units.
inline constexpr double kPercent = 100.0;

Json block_to_json(const KMetrics& block);
Json blocks_to_json(const std::vector<KMetrics>& blocks);

/// Per-k differences (current - baseline) of the scalar metrics, taken on
/// the emitted percent values so equal inputs give exactly zero.
Json deltas_json(const Json& baseline_blocks, const Json& current_blocks);

Json warnings_to_json(const std::vector<RecalibrationWarning>& warnings);

/// Stable text form: two-space indent, trailing newline.
std::string dump_json(const Json& report);

Json read_json_file(const std::string& path);

/// Reliability rows of the block for `k` in an emitted report.
struct ReliabilityRow {
  double bin_low = 0.0;
  double bin_high = 0.0;
  double mean_conf = 0.0;
  double mean_acc = 0.0;
  std::uint64_t count = 0;
};
std::vector<ReliabilityRow> reliability_from_report(const Json& report, std::size_t k);
std::vector<ReliabilityRow> reliability_rows(const ReliabilityBins& bins);

void write_reliability_csv(std::ostream& out, const std::vector<ReliabilityRow>& rows);
void write_histogram_csv(std::ostream& out, const std::vector<ReliabilityRow>& rows);

/// One row per k with the scalar metrics.
void write_report_csv(std::ostream& out, const Json& report);

}  // namespace topkcal::cli
