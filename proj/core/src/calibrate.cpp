#include "topkcal/calibrate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "topkcal/error.hpp"
#include "topkcal/ingest.hpp"
#include "topkcal/topk.hpp"

namespace topkcal {

namespace {

void require_finite_scores(std::span<const ScoreOutcome> pairs) {
  for (const auto& p : pairs) {
    if (!std::isfinite(p.score)) throw Error(ErrorKind::input, "non-finite score");
  }
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double platt_loss(std::span<const ScoreOutcome> pairs, double a, double b) {
  double total = 0.0;
  for (const auto& p : pairs) {
    const double z = a * p.score + b;
    total += p.outcome * softplus(z) + (1.0 - p.outcome) * softplus(-z);
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace

IsotonicModel fit_isotonic(std::span<const ScoreOutcome> pairs) {
  if (pairs.size() < 2) throw Error(ErrorKind::data, "insufficient calibration data");
  require_finite_scores(pairs);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return pairs[i].score < pairs[j].score;
  });

  struct Block {
    double start;
    double weight;
    double sum;
    double mean() const { return sum / weight; }
  };
  std::vector<Block> blocks;
  blocks.reserve(pairs.size());
  for (std::size_t idx = 0; idx < order.size();) {
    // Tied scores enter as one block.
    Block b{pairs[order[idx]].score, 0.0, 0.0};
    while (idx < order.size() && pairs[order[idx]].score == b.start) {
      b.weight += 1.0;
      b.sum += pairs[order[idx]].outcome;
      ++idx;
    }
    blocks.push_back(b);
    while (blocks.size() >= 2 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      const Block top = blocks.back();
      blocks.pop_back();
      blocks.back().weight += top.weight;
      blocks.back().sum += top.sum;
    }
  }

  IsotonicModel model;
  model.thresholds.reserve(blocks.size());
  model.values.reserve(blocks.size());
  for (const auto& b : blocks) {
    const double value = std::clamp(b.mean(), 0.0, 1.0);
    // Equal neighbours are one step; keep the model minimal.
    if (!model.values.empty() && model.values.back() == value) continue;
    model.thresholds.push_back(b.start);
    model.values.push_back(value);
  }
  return model;
}

double apply_isotonic(const IsotonicModel& model, double score) {
  const auto it = std::upper_bound(model.thresholds.begin(), model.thresholds.end(), score);
  if (it == model.thresholds.begin()) return model.values.front();
  return model.values[static_cast<std::size_t>(it - model.thresholds.begin()) - 1];
}

PlattFit fit_platt_detailed(std::span<const ScoreOutcome> pairs, const PlattOptions& options) {
  if (pairs.size() < 2) throw Error(ErrorKind::data, "insufficient calibration data");
  require_finite_scores(pairs);

  const double n = static_cast<double>(pairs.size());
  double positives = 0.0;
  bool has_pos = false, has_neg = false;
  for (const auto& p : pairs) {
    positives += p.outcome;
    has_pos = has_pos || p.outcome > 0.0;
    has_neg = has_neg || p.outcome < 1.0;
  }
  const double rate = std::clamp(positives / n, options.min_rate, 1.0 - options.min_rate);

  PlattFit fit;
  fit.model = {0.0, -std::log(rate / (1.0 - rate))};
  if (!has_pos || !has_neg) {
    fit.single_class = true;
    fit.converged = true;
    return fit;
  }

  double a = fit.model.a, b = fit.model.b;
  double loss = platt_loss(pairs, a, b);
  double ridge = 1e-12;
  for (fit.iterations = 0; fit.iterations < options.max_iterations; ++fit.iterations) {
    double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
    for (const auto& p : pairs) {
      const double prob = sigmoid_link(-(a * p.score + b));
      const double r = p.outcome - prob;
      const double w = prob * (1.0 - prob);
      ga += r * p.score;
      gb += r;
      haa += w * p.score * p.score;
      hab += w * p.score;
      hbb += w;
    }
    ga /= n;
    gb /= n;
    haa /= n;
    hab /= n;
    hbb /= n;
    if (std::max(std::abs(ga), std::abs(gb)) < options.gradient_tolerance) {
      fit.converged = true;
      break;
    }

    // Levenberg-damped Newton step with backtracking on the loss.
    bool improved = false;
    for (int attempt = 0; attempt < 40 && !improved; ++attempt) {
      const double d_aa = haa + ridge, d_bb = hbb + ridge;
      const double det = d_aa * d_bb - hab * hab;
      if (!(det > 0.0) || !std::isfinite(det)) {
        ridge = std::max(ridge * 10.0, 1e-10);
        continue;
      }
      const double step_a = -(d_bb * ga - hab * gb) / det;
      const double step_b = -(d_aa * gb - hab * ga) / det;
      double t = 1.0;
      for (int halving = 0; halving < 30; ++halving, t *= 0.5) {
        const double na = a + t * step_a, nb = b + t * step_b;
        const double nl = platt_loss(pairs, na, nb);
        if (nl <= loss) {
          a = na;
          b = nb;
          loss = nl;
          improved = true;
          break;
        }
      }
      if (improved) {
        ridge = std::max(ridge * 0.1, 1e-12);
      } else {
        ridge *= 10.0;
      }
    }
    if (!improved) break;  // no further descent possible at machine precision
  }
  fit.model = {a, b};
  return fit;
}

PlattModel fit_platt(std::span<const ScoreOutcome> pairs, const PlattOptions& options) {
  return fit_platt_detailed(pairs, options).model;
}

double apply_platt(const PlattModel& model, double score) {
  return sigmoid_link(-(model.a * score + model.b));
}

double Calibrator::operator()(double probability) const {
  const double input = domain == ScoreDomain::logit ? clamped_logit(probability) : probability;
  return std::visit(
      [input](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, IsotonicModel>) {
          return apply_isotonic(m, input);
        } else if constexpr (std::is_same_v<M, PlattModel>) {
          return apply_platt(m, input);
        } else {
          return minmax_squash(input, m);
        }
      },
      model);
}

bool Calibrator::is_non_decreasing() const {
  if (const auto* platt = std::get_if<PlattModel>(&model)) return platt->a <= 0.0;
  return true;
}

CalibratorFit fit_calibrator(CalibrationMethod method, std::span<const ScoreOutcome> pairs) {
  CalibratorFit out;
  if (method == CalibrationMethod::isotonic) {
    out.calibrator = {fit_isotonic(pairs), ScoreDomain::probability};
    out.single_class = std::all_of(pairs.begin(), pairs.end(),
                                   [&](const ScoreOutcome& p) { return p.outcome == pairs[0].outcome; });
    return out;
  }
  std::vector<ScoreOutcome> logits(pairs.begin(), pairs.end());
  for (auto& p : logits) p.score = clamped_logit(p.score);
  const auto fit = fit_platt_detailed(logits);
  out.calibrator = {fit.model, ScoreDomain::logit};
  out.single_class = fit.single_class;
  return out;
}

namespace {

constexpr const char* kMagic = "topkcal-calibrators";
constexpr int kVersion = 1;

const char* domain_name(ScoreDomain d) {
  return d == ScoreDomain::logit ? "logit" : "probability";
}

[[noreturn]] void bad_file(const std::string& what) {
  throw Error(ErrorKind::input, "bad calibrator file: " + what);
}

double parse_double(const std::string& token) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) bad_file("bad number '" + token + "'");
  return v;
}

std::vector<double> read_list(std::istream& in, const std::string& key, std::size_t size) {
  std::string word;
  if (!(in >> word) || word != key) bad_file("expected '" + key + "'");
  std::vector<double> values(size);
  for (auto& v : values) {
    if (!(in >> word)) bad_file("truncated '" + key + "'");
    v = parse_double(word);
  }
  return values;
}

double read_scalar(std::istream& in, const std::string& key) {
  return read_list(in, key, 1).front();
}

}  // namespace

void write_calibrators(std::ostream& out, std::span<const Calibrator> models) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "count " << models.size() << '\n';
  for (const auto& c : models) {
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, IsotonicModel>) {
            out << "model isotonic " << domain_name(c.domain) << ' ' << m.values.size() << '\n';
            out << "thresholds";
            for (double t : m.thresholds) out << ' ' << format_double(t);
            out << "\nvalues";
            for (double v : m.values) out << ' ' << format_double(v);
            out << '\n';
          } else if constexpr (std::is_same_v<M, PlattModel>) {
            out << "model platt " << domain_name(c.domain) << '\n';
            out << "a " << format_double(m.a) << "\nb " << format_double(m.b) << '\n';
          } else {
            out << "model minmax " << domain_name(c.domain) << '\n';
            out << "min " << format_double(m.min) << "\nmax " << format_double(m.max) << '\n';
          }
        },
        c.model);
  }
}

std::vector<Calibrator> read_calibrators(std::istream& in) {
  std::string word;
  int version = 0;
  if (!(in >> word) || word != kMagic) bad_file("missing header");
  if (!(in >> version) || version != kVersion) bad_file("unsupported version");
  std::size_t count = 0;
  if (!(in >> word) || word != "count" || !(in >> count)) bad_file("missing count");

  std::vector<Calibrator> models;
  models.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string kind, domain;
    if (!(in >> word) || word != "model" || !(in >> kind >> domain)) bad_file("missing model");
    Calibrator c;
    if (domain == "logit") {
      c.domain = ScoreDomain::logit;
    } else if (domain != "probability") {
      bad_file("unknown domain '" + domain + "'");
    }
    if (kind == "isotonic") {
      std::size_t size = 0;
      if (!(in >> size) || size == 0) bad_file("bad isotonic size");
      IsotonicModel m;
      m.thresholds = read_list(in, "thresholds", size);
      m.values = read_list(in, "values", size);
      if (!std::is_sorted(m.values.begin(), m.values.end()) ||
          std::adjacent_find(m.thresholds.begin(), m.thresholds.end(), std::greater_equal<>()) !=
              m.thresholds.end()) {
        bad_file("isotonic model is not monotone");
      }
      c.model = std::move(m);
    } else if (kind == "platt") {
      PlattModel m;
      m.a = read_scalar(in, "a");
      m.b = read_scalar(in, "b");
      c.model = m;
    } else if (kind == "minmax") {
      MinMaxSquash m;
      m.min = read_scalar(in, "min");
      m.max = read_scalar(in, "max");
      if (!(m.max > m.min)) bad_file("degenerate score range");
      c.model = m;
    } else {
      bad_file("unknown model kind '" + kind + "'");
    }
    models.push_back(std::move(c));
  }
  return models;
}

}  // namespace topkcal
