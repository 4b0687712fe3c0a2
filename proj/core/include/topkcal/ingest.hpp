#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topkcal/types.hpp"

namespace topkcal {

/// First line of an extreme-classification repository file: "N D M".
struct RepoHeader {
  std::uint64_t n = 0;  // instances
  std::uint64_t d = 0;  // feature dimension
  std::uint64_t m = 0;  // labels

  friend bool operator==(const RepoHeader&, const RepoHeader&) = default;
};

/// Streaming reader for repository-format ground truth.
///
/// Each data line is "l1,l2,... f:v f:v ..."; the label list may be empty.
/// Feature pairs are skipped without being parsed. Instance ids follow
/// 0-based data-line order. Line numbers in errors count the header as 1.
class RepoReader {
 public:
  /// Reads and validates the header immediately.
  explicit RepoReader(std::istream& in);

  const RepoHeader& header() const noexcept { return header_; }

  /// Next instance, or nullopt at end of input. At end of input the number
  /// of data lines is checked against the header.
  std::optional<GroundTruth> next();

  std::uint64_t instances_read() const noexcept { return next_id_; }

 private:
  std::istream* in_;
  RepoHeader header_;
  std::string line_;
  std::size_t line_no_ = 0;
  std::uint64_t next_id_ = 0;
};

std::pair<RepoHeader, std::vector<GroundTruth>> parse_repo_file(std::istream& in);

/// Parses one data line into a label set; exposed for tests and tools.
std::vector<LabelId> parse_repo_labels(std::string_view line, std::uint64_t label_count,
                                       std::size_t line_no);

/// Writes the header and one line per instance. Instances carry a single
/// placeholder feature "0:1" so no line is blank.
void write_repo_file(std::ostream& out, const RepoHeader& header,
                     std::span<const GroundTruth> truth);

/// Top-k prediction dump: one "instance_id<TAB>label:prob label:prob ..." line
/// per instance. `k` is the longest row seen.
struct PredictionDump {
  std::size_t k = 0;
  std::vector<TopKPredictions> rows;
};

/// Streaming reader for prediction dumps. Rows come back in ranking order
/// whatever the order in the file.
class PredictionReader {
 public:
  explicit PredictionReader(std::istream& in) : in_(&in) {}

  std::optional<TopKPredictions> next();

  /// Same as next() but reuses `row`'s storage. Returns false at end of input.
  bool next(TopKPredictions& row);

  std::size_t max_entries() const noexcept { return max_entries_; }
  std::uint64_t rows_read() const noexcept { return rows_read_; }

 private:
  std::istream* in_;
  std::string line_;
  std::vector<LabelId> scratch_;
  std::size_t line_no_ = 0;
  std::size_t max_entries_ = 0;
  std::uint64_t rows_read_ = 0;
  std::optional<InstanceId> last_id_;
};

PredictionDump parse_prediction_dump(std::istream& in);

/// 17 significant digits, locale independent; parses back to the same bits.
std::string format_double(double value);

void write_prediction_row(std::ostream& out, const TopKPredictions& row);
void write_prediction_dump(std::ostream& out, std::span<const TopKPredictions> rows);

}  // namespace topkcal
