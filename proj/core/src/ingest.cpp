#include "topkcal/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string_view>

#include "topkcal/error.hpp"
#include "topkcal/topk.hpp"

namespace topkcal {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t'; }

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

template <typename T>
bool parse_whole(std::string_view token, T& out) {
  if (token.empty()) return false;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string_view next_token(std::string_view& rest) {
  std::size_t begin = 0;
  while (begin < rest.size() && is_space(rest[begin])) ++begin;
  std::size_t end = begin;
  while (end < rest.size() && !is_space(rest[end])) ++end;
  const auto token = rest.substr(begin, end - begin);
  rest.remove_prefix(end);
  return token;
}

}  // namespace

RepoReader::RepoReader(std::istream& in) : in_(&in) {
  if (!std::getline(*in_, line_)) throw Error(ErrorKind::input, "bad header");
  strip_cr(line_);
  line_no_ = 1;
  std::string_view rest = line_;
  std::uint64_t fields[3] = {};
  for (auto& field : fields) {
    if (!parse_whole(next_token(rest), field) || field == 0) {
      throw Error(ErrorKind::input, "bad header");
    }
  }
  if (!next_token(rest).empty()) throw Error(ErrorKind::input, "bad header");
  header_ = {fields[0], fields[1], fields[2]};
}

std::vector<LabelId> parse_repo_labels(std::string_view line, std::uint64_t label_count,
                                       std::size_t line_no) {
  std::size_t end = 0;
  while (end < line.size() && !is_space(line[end])) ++end;
  const std::string_view token = line.substr(0, end);
  std::vector<LabelId> labels;
  // A leading feature pair means the label list is empty.
  if (token.empty() || token.find(':') != std::string_view::npos) return labels;

  std::string_view rest = token;
  while (true) {
    const auto comma = rest.find(',');
    const auto piece = rest.substr(0, comma);
    std::uint64_t id = 0;
    if (!parse_whole(piece, id)) throw Error(ErrorKind::input, at_line("bad label token", line_no));
    if (id >= label_count) throw Error(ErrorKind::input, at_line("label out of range", line_no));
    labels.push_back(static_cast<LabelId>(id));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

std::optional<GroundTruth> RepoReader::next() {
  if (!std::getline(*in_, line_)) {
    if (next_id_ != header_.n) {
      throw Error(ErrorKind::input, "instance count mismatch: header says " +
                                        std::to_string(header_.n) + ", file has " +
                                        std::to_string(next_id_));
    }
    return std::nullopt;
  }
  strip_cr(line_);
  ++line_no_;
  GroundTruth gt;
  gt.instance_id = next_id_++;
  gt.relevant = parse_repo_labels(line_, header_.m, line_no_);
  return gt;
}

std::pair<RepoHeader, std::vector<GroundTruth>> parse_repo_file(std::istream& in) {
  RepoReader reader(in);
  std::vector<GroundTruth> truth;
  truth.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(reader.header().n, 1U << 24)));
  while (auto gt = reader.next()) truth.push_back(std::move(*gt));
  return {reader.header(), std::move(truth)};
}

void write_repo_file(std::ostream& out, const RepoHeader& header,
                     std::span<const GroundTruth> truth) {
  out << header.n << ' ' << header.d << ' ' << header.m << '\n';
  for (const auto& gt : truth) {
    for (std::size_t i = 0; i < gt.relevant.size(); ++i) {
      if (i) out << ',';
      out << gt.relevant[i];
    }
    out << " 0:1\n";
  }
}

bool PredictionReader::next(TopKPredictions& row) {
  if (!std::getline(*in_, line_)) return false;
  strip_cr(line_);
  ++line_no_;

  const auto tab = line_.find('\t');
  InstanceId id = 0;
  if (tab == std::string::npos || !parse_whole(std::string_view(line_).substr(0, tab), id)) {
    throw Error(ErrorKind::input, at_line("bad prediction line", line_no_));
  }
  if (last_id_ && id <= *last_id_) {
    throw Error(ErrorKind::input, at_line("instance ids not increasing", line_no_));
  }
  last_id_ = id;

  row.instance_id = id;
  row.entries.clear();
  std::string_view rest = std::string_view(line_).substr(tab + 1);
  while (true) {
    const auto token = next_token(rest);
    if (token.empty()) break;
    const auto colon = token.find(':');
    std::uint64_t label = 0;
    double prob = 0.0;
    if (colon == std::string_view::npos || !parse_whole(token.substr(0, colon), label) ||
        label > 0xffffffffULL || !parse_whole(token.substr(colon + 1), prob)) {
      throw Error(ErrorKind::input, at_line("bad prediction pair", line_no_));
    }
    if (!(prob >= 0.0 && prob <= 1.0)) {
      throw Error(ErrorKind::input, at_line("probability out of range", line_no_));
    }
    row.entries.push_back({static_cast<LabelId>(label), prob});
  }

  scratch_.clear();
  for (const auto& e : row.entries) scratch_.push_back(e.label);
  std::sort(scratch_.begin(), scratch_.end());
  if (std::adjacent_find(scratch_.begin(), scratch_.end()) != scratch_.end()) {
    throw Error(ErrorKind::input, at_line("duplicate label", line_no_));
  }
  sort_ranked(row.entries);

  max_entries_ = std::max(max_entries_, row.entries.size());
  ++rows_read_;
  return true;
}

std::optional<TopKPredictions> PredictionReader::next() {
  TopKPredictions row;
  if (!next(row)) return std::nullopt;
  return row;
}

PredictionDump parse_prediction_dump(std::istream& in) {
  PredictionReader reader(in);
  PredictionDump dump;
  while (auto row = reader.next()) dump.rows.push_back(std::move(*row));
  dump.k = reader.max_entries();
  return dump;
}

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

void write_prediction_row(std::ostream& out, const TopKPredictions& row) {
  char buf[64];
  out << row.instance_id << '\t';
  for (std::size_t i = 0; i < row.entries.size(); ++i) {
    if (i) out << ' ';
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, row.entries[i].label);
    *ptr++ = ':';
    ptr = std::to_chars(ptr, buf + sizeof buf, row.entries[i].score, std::chars_format::general, 17).ptr;
    out.write(buf, ptr - buf);
  }
  out << '\n';
}

void write_prediction_dump(std::ostream& out, std::span<const TopKPredictions> rows) {
  for (const auto& row : rows) write_prediction_row(out, row);
}

}  // namespace topkcal
