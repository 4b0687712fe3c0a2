#include "topkcal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "topkcal/error.hpp"
#include "topkcal/ingest.hpp"
#include "topkcal/topk.hpp"

namespace topkcal {

namespace {

constexpr double kLogitSpread = 1.25;
constexpr double kExpectedPositives = 5.0;

// splitmix64 finalizer; decorrelates per-instance substream seeds.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t instance) {
  return std::mt19937_64(mix(mix(seed) ^ mix(instance + 0x632be59bd9b4e019ULL)));
}

// Distributions are written out so worlds are identical across standard
// libraries; only the engine output is specified by the standard.
double unit_uniform(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& engine) {
  const double u1 = 1.0 - unit_uniform(engine);  // (0, 1]
  const double u2 = unit_uniform(engine);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void sample_truth(std::mt19937_64& engine, std::span<const ScoredLabel> pool, GroundTruth& gt) {
  gt.relevant.clear();
  for (const auto& e : pool) {
    if (unit_uniform(engine) < e.score) gt.relevant.push_back(e.label);
  }
  std::sort(gt.relevant.begin(), gt.relevant.end());
}

template <typename Fn>
void for_ranges(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, n));
  if (threads == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::jthread> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] { fn(n * t / threads, n * (t + 1) / threads); });
  }
}

}  // namespace

double SyntheticWorld::conditional(std::size_t instance, LabelId label) const {
  for (const auto& e : pool(instance)) {
    if (e.label == label) return e.score;
  }
  return 0.0;
}

SyntheticWorld generate_world(const WorldParams& params, std::size_t threads) {
  if (params.n == 0 || params.m == 0 || params.k == 0) {
    throw Error(ErrorKind::config, "n, m and k must be positive");
  }
  if (params.k > params.m) throw Error(ErrorKind::config, "k exceeds label count");
  if (!(params.tail_exponent > 0.0)) throw Error(ErrorKind::config, "tail exponent must be positive");

  const std::size_t pool_size = std::min(params.m, std::max<std::size_t>(2 * params.k, 10));
  const double target_mean = std::min(kExpectedPositives / static_cast<double>(pool_size), 0.95);
  // Mean of sigmoid(N(mu, s^2)) ~ sigmoid(mu / sqrt(1 + pi s^2 / 8)).
  const double center = std::log(target_mean / (1.0 - target_mean)) *
                        std::sqrt(1.0 + std::numbers::pi * kLogitSpread * kLogitSpread / 8.0);

  std::vector<double> cdf(params.m);
  double running = 0.0;
  for (std::size_t j = 0; j < params.m; ++j) {
    running += std::pow(static_cast<double>(j + 1), -params.tail_exponent);
    cdf[j] = running;
  }

  SyntheticWorld world;
  world.n = params.n;
  world.m = params.m;
  world.k = params.k;
  world.tail_exponent = params.tail_exponent;
  world.seed = params.seed;
  world.offsets.resize(params.n + 1);
  for (std::size_t i = 0; i <= params.n; ++i) world.offsets[i] = i * pool_size;
  world.conditionals.resize(params.n * pool_size);
  world.truth.resize(params.n);

  for_ranges(params.n, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<LabelId> labels;
    std::vector<char> used(params.m, 0);
    for (std::size_t i = begin; i < end; ++i) {
      auto engine = substream(params.seed, i);
      labels.clear();
      const std::size_t max_attempts = 64 * pool_size;
      for (std::size_t attempt = 0; attempt < max_attempts && labels.size() < pool_size; ++attempt) {
        const double u = unit_uniform(engine) * running;
        auto j = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        j = std::min(j, params.m - 1);
        if (!used[j]) {
          used[j] = 1;
          labels.push_back(static_cast<LabelId>(j));
        }
      }
      // Very steep priors: fill the rest with the most probable unused labels.
      for (std::size_t j = 0; labels.size() < pool_size; ++j) {
        if (!used[j]) {
          used[j] = 1;
          labels.push_back(static_cast<LabelId>(j));
        }
      }

      auto* pool = world.conditionals.data() + world.offsets[i];
      for (std::size_t p = 0; p < pool_size; ++p) {
        pool[p] = {labels[p], sigmoid_link(center + kLogitSpread * standard_normal(engine))};
        used[labels[p]] = 0;
      }
      std::sort(pool, pool + pool_size, ranks_before);

      auto& gt = world.truth[i];
      gt.instance_id = i;
      sample_truth(engine, {pool, pool_size}, gt);
    }
  });
  return world;
}

SyntheticWorld make_world(const std::vector<std::vector<ScoredLabel>>& conditionals,
                          std::size_t m, std::size_t k, std::uint64_t seed) {
  SyntheticWorld world;
  world.n = conditionals.size();
  world.m = m;
  world.k = k;
  world.seed = seed;
  world.offsets.push_back(0);
  for (const auto& row : conditionals) {
    for (const auto& e : row) {
      if (e.label >= m) throw Error(ErrorKind::config, "label out of range");
      if (!(e.score >= 0.0 && e.score <= 1.0)) throw Error(ErrorKind::config, "conditional outside [0,1]");
    }
    std::vector<ScoredLabel> sorted = row;
    sort_ranked(sorted);
    world.conditionals.insert(world.conditionals.end(), sorted.begin(), sorted.end());
    world.offsets.push_back(world.conditionals.size());
  }
  world.truth.resize(world.n);
  for (std::size_t i = 0; i < world.n; ++i) {
    auto engine = substream(seed, i);
    world.truth[i].instance_id = i;
    sample_truth(engine, world.pool(i), world.truth[i]);
  }
  return world;
}

Distortion Distortion::temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorKind::config, "temperature must be positive");
  return {Kind::temperature, t};
}

Distortion Distortion::midrange(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorKind::config, "midrange exponent must be positive");
  return {Kind::midrange, gamma};
}

Distortion Distortion::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  auto parameter = [&]() -> double {
    if (colon == std::string::npos) throw Error(ErrorKind::config, "distortion '" + name + "' needs a parameter");
    try {
      std::size_t used = 0;
      const std::string value = text.substr(colon + 1);
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::config, "bad distortion parameter in '" + text + "'");
    }
  };
  if (name == "identity") return identity();
  if (name == "softmax" || name == "softmax_normalize") return softmax_normalize();
  if (name == "temperature") return temperature(parameter());
  if (name == "midrange") return midrange(parameter());
  throw Error(ErrorKind::config, "unknown distortion '" + text + "'");
}

std::string Distortion::to_string() const {
  switch (kind) {
    case Kind::identity:
      return "identity";
    case Kind::temperature:
      return "temperature:" + format_double(parameter);
    case Kind::midrange:
      return "midrange:" + format_double(parameter);
    case Kind::softmax_normalize:
      return "softmax_normalize";
  }
  return "identity";
}

double distort_probability(double p, const Distortion& d) {
  switch (d.kind) {
    case Distortion::Kind::identity:
    case Distortion::Kind::softmax_normalize:
      return p;
    case Distortion::Kind::temperature:
      return sigmoid_link(clamped_logit(p) / d.parameter);
    case Distortion::Kind::midrange: {
      const double offset = p - 0.5;
      const double magnitude = std::pow(std::abs(offset), d.parameter) * std::pow(0.5, 1.0 - d.parameter);
      return std::clamp(offset < 0.0 ? 0.5 - magnitude : 0.5 + magnitude, 0.0, 1.0);
    }
  }
  return p;
}

std::vector<TopKPredictions> distort(const SyntheticWorld& world, const Distortion& d) {
  std::vector<TopKPredictions> out(world.n);
  std::vector<ScoredLabel> scored;
  for (std::size_t i = 0; i < world.n; ++i) {
    const auto pool = world.pool(i);
    out[i].instance_id = i;
    if (pool.empty()) continue;
    scored.assign(pool.begin(), pool.end());
    if (d.kind == Distortion::Kind::softmax_normalize) {
      double total = 0.0;
      for (const auto& e : pool) total += e.score;
      for (auto& e : scored) e.score = total > 0.0 ? e.score / total : 0.0;
    } else {
      for (auto& e : scored) e.score = distort_probability(e.score, d);
    }
    out[i].entries = select_top_k(scored, world.k);
  }
  return out;
}

std::vector<CalibrationPair> expected_pairs(const SyntheticWorld& world,
                                            std::span<const TopKPredictions> dump, std::size_t k) {
  std::vector<CalibrationPair> pairs;
  for (const auto& row : dump) {
    if (row.instance_id >= world.n) {
      throw Error(ErrorKind::alignment, "unknown instance " + std::to_string(row.instance_id));
    }
    const std::size_t take = std::min(k, row.entries.size());
    for (std::size_t r = 0; r < take; ++r) {
      pairs.push_back({row.entries[r].score,
                       world.conditional(static_cast<std::size_t>(row.instance_id), row.entries[r].label),
                       row.instance_id, static_cast<std::uint32_t>(r + 1)});
    }
  }
  return pairs;
}

double analytic_ece(const SyntheticWorld& world, std::span<const TopKPredictions> dump,
                    std::size_t k, std::size_t bins) {
  return ece(expected_pairs(world, dump, k), bins).value;
}

}  // namespace topkcal
