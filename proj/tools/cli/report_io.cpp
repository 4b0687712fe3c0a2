#include "cli/report_io.hpp"

#include <fstream>
#include <ostream>

#include "topkcal/error.hpp"
#include "topkcal/ingest.hpp"

namespace topkcal::cli {

namespace {

constexpr const char* kScalarKeys[] = {"ece", "ace", "brier", "nll", "p_at_k", "ndcg_at_k"};

Json reliability_to_json(const ReliabilityBins& bins) {
  Json rows = Json::array();
  for (const auto& b : bins.bins) {
    rows.push_back({{"bin_low", b.low},
                    {"bin_high", b.high},
                    {"mean_conf", b.mean_conf},
                    {"mean_acc", b.mean_acc},
                    {"count", b.count}});
  }
  return rows;
}

}  // namespace

Json block_to_json(const KMetrics& m) {
  Json block;
  block["k"] = m.k;
  block["instances"] = m.instances;
  block["pairs"] = m.pairs;
  block["ece"] = m.ece * kPercent;
  block["ace"] = m.ace ? Json(*m.ace * kPercent) : Json(nullptr);
  block["brier"] = m.brier * kPercent;
  block["nll"] = m.nll;
  block["p_at_k"] = m.precision * kPercent;
  block["ndcg_at_k"] = m.ndcg * kPercent;
  block["brier_decomposition"] = {{"reliability", m.decomposition.reliability * kPercent},
                                  {"resolution", m.decomposition.resolution * kPercent},
                                  {"uncertainty", m.decomposition.uncertainty * kPercent}};
  Json per_rank = Json::array();
  for (double v : m.per_rank_ece) per_rank.push_back(v * kPercent);
  block["per_rank_ece"] = per_rank;
  block["reliability"] = reliability_to_json(m.reliability);
  if (m.adaptive) block["adaptive_reliability"] = reliability_to_json(*m.adaptive);
  Json histogram = Json::array();
  for (const auto& b : m.reliability.bins) {
    histogram.push_back({{"bin_low", b.low}, {"bin_high", b.high}, {"count", b.count}});
  }
  block["histogram"] = histogram;
  return block;
}

Json blocks_to_json(const std::vector<KMetrics>& blocks) {
  Json out = Json::array();
  for (const auto& b : blocks) out.push_back(block_to_json(b));
  return out;
}

Json deltas_json(const Json& baseline_blocks, const Json& current_blocks) {
  Json out = Json::array();
  for (const auto& cur : current_blocks) {
    for (const auto& base : baseline_blocks) {
      if (base.at("k") != cur.at("k")) continue;
      Json d;
      d["k"] = cur.at("k");
      for (const char* key : kScalarKeys) {
        const auto& a = cur.at(key);
        const auto& b = base.at(key);
        d[key] = (a.is_number() && b.is_number()) ? Json(a.get<double>() - b.get<double>())
                                                  : Json(nullptr);
      }
      out.push_back(d);
    }
  }
  return out;
}

Json warnings_to_json(const std::vector<RecalibrationWarning>& warnings) {
  Json out = Json::array();
  for (const auto& w : warnings) {
    out.push_back({{"fold", w.fold}, {"rank", w.rank}, {"message", w.message}});
  }
  return out;
}

std::string dump_json(const Json& report) { return report.dump(2) + "\n"; }

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::input, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::input, "bad report " + path + ": " + e.what());
  }
}

std::vector<ReliabilityRow> reliability_from_report(const Json& report, std::size_t k) {
  try {
    for (const auto& block : report.at("k_blocks")) {
      if (block.at("k").get<std::size_t>() != k) continue;
      std::vector<ReliabilityRow> rows;
      for (const auto& r : block.at("reliability")) {
        rows.push_back({r.at("bin_low").get<double>(), r.at("bin_high").get<double>(),
                        r.at("mean_conf").get<double>(), r.at("mean_acc").get<double>(),
                        r.at("count").get<std::uint64_t>()});
      }
      return rows;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::input, std::string("bad report: ") + e.what());
  }
  throw Error(ErrorKind::config, "report has no block for k=" + std::to_string(k));
}

std::vector<ReliabilityRow> reliability_rows(const ReliabilityBins& bins) {
  std::vector<ReliabilityRow> rows;
  for (const auto& b : bins.bins) rows.push_back({b.low, b.high, b.mean_conf, b.mean_acc, b.count});
  return rows;
}

void write_reliability_csv(std::ostream& out, const std::vector<ReliabilityRow>& rows) {
  out << "bin_low,bin_high,mean_conf,mean_acc,count\n";
  for (const auto& r : rows) {
    out << format_double(r.bin_low) << ',' << format_double(r.bin_high) << ','
        << format_double(r.mean_conf) << ',' << format_double(r.mean_acc) << ',' << r.count << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const std::vector<ReliabilityRow>& rows) {
  out << "bin_low,bin_high,count\n";
  for (const auto& r : rows) {
    out << format_double(r.bin_low) << ',' << format_double(r.bin_high) << ',' << r.count << '\n';
  }
}

void write_report_csv(std::ostream& out, const Json& report) {
  out << "k,instances,pairs,ece,ace,brier,nll,p_at_k,ndcg_at_k\n";
  for (const auto& block : report.at("k_blocks")) {
    out << block.at("k").get<std::size_t>() << ',' << block.at("instances").get<std::uint64_t>()
        << ',' << block.at("pairs").get<std::uint64_t>();
    for (const char* key : kScalarKeys) {
      out << ',';
      const auto& v = block.at(key);
      if (v.is_number()) out << format_double(v.get<double>());
    }
    out << '\n';
  }
}

}  // namespace topkcal::cli
