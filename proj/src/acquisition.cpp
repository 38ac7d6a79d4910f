#include "agral/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "agral/errors.hpp"
#include "agral/rng.hpp"

namespace agral {

AcquisitionKind acquisition_from_name(const std::string& name) {
  if (name == "BALD") return AcquisitionKind::Bald;
  if (name == "PowerBALD") return AcquisitionKind::PowerBald;
  if (name == "Random") return AcquisitionKind::Random;
  throw ConfigError("unknown acquisition function '" + name +
                    "' (expected BALD, PowerBALD or Random)");
}

std::string acquisition_name(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::Bald: return "BALD";
    case AcquisitionKind::PowerBald: return "PowerBALD";
    case AcquisitionKind::Random: return "Random";
  }
  return "?";
}

namespace {

double entropy_unchecked(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double entropy(std::span<const double> dist) {
  double sum = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0)) throw DataError("entropy: negative or non-finite entry");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > kStackNormTolerance) {
    throw DataError("entropy: distribution sums to " + std::to_string(sum));
  }
  return entropy_unchecked(dist);
}

ScoreMap bald_map(const ProbabilityStack& stack, bool clamp) {
  const auto check = validate_stack(stack);
  if (!check.ok) throw DataError("bald_map: invalid stack: " + check.detail);

  ScoreMap map;
  map.height = stack.height;
  map.width = stack.width;
  map.values.resize(stack.height * stack.width);

  const double inv_s = 1.0 / static_cast<double>(stack.samples);
  std::vector<double> mean(stack.classes);
  for (std::size_t h = 0; h < stack.height; ++h) {
    for (std::size_t w = 0; w < stack.width; ++w) {
      std::fill(mean.begin(), mean.end(), 0.0);
      double cond = 0.0;  // mean over samples of per-sample entropy
      for (std::size_t s = 0; s < stack.samples; ++s) {
        double hs = 0.0;
        for (std::size_t c = 0; c < stack.classes; ++c) {
          const double p = stack.at(s, c, h, w);
          mean[c] += p * inv_s;
          if (p > 0.0) hs -= p * std::log(p);
        }
        cond += hs * inv_s;
      }
      double v = entropy_unchecked(mean) - cond;
      if (clamp && v < 0.0) v = 0.0;
      map.at(h, w) = static_cast<float>(v);
    }
  }
  return map;
}

double aggregate(const ScoreMap& map, const Aggregation& agg) {
  const std::size_t n = map.values.size();
  if (n == 0) throw DataError("aggregate: empty score map");
  if (agg.mode == Aggregation::Mode::Mean) {
    double sum = 0.0;
    for (float v : map.values) sum += std::max(0.0f, v);
    return sum / static_cast<double>(n);
  }
  if (agg.top_k < 1 || agg.top_k > n) {
    throw DataError("aggregate: top-K " + std::to_string(agg.top_k) +
                    " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<float> vals(map.values);
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(agg.top_k - 1),
                   vals.end(), std::greater<float>());
  double sum = 0.0;
  for (std::size_t i = 0; i < agg.top_k; ++i) sum += std::max(0.0f, vals[i]);
  return sum;
}

std::vector<std::string> select_bald(std::vector<ImageScore> scores, std::size_t k) {
  if (k > scores.size()) {
    throw DataError("select_bald: k=" + std::to_string(k) + " exceeds pool size " +
                    std::to_string(scores.size()));
  }
  std::sort(scores.begin(), scores.end(), [](const ImageScore& a, const ImageScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(scores[i].id);
  return out;
}

PowerBaldSelection select_powerbald(std::vector<ImageScore> scores, std::size_t k,
                                    double temperature, std::uint64_t seed) {
  if (k > scores.size()) {
    throw DataError("select_powerbald: k=" + std::to_string(k) +
                    " exceeds pool size " + std::to_string(scores.size()));
  }
  if (!(temperature > 0.0)) throw DataError("select_powerbald: temperature must be > 0");

  // Stable ordering first so the draw sequence is independent of input order.
  std::sort(scores.begin(), scores.end(),
            [](const ImageScore& a, const ImageScore& b) { return a.id < b.id; });

  Rng rng(seed);
  PowerBaldSelection sel;
  std::vector<bool> taken(scores.size(), false);
  // Powered weights in log space; score^(1/T) overflows double for small T.
  std::vector<double> log_w(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    log_w[i] = scores[i].score > 0.0
                   ? std::log(scores[i].score) / temperature
                   : -std::numeric_limits<double>::infinity();
  }

  for (std::size_t draw = 0; draw < k; ++draw) {
    double max_lw = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!taken[i]) max_lw = std::max(max_lw, log_w[i]);
    }

    std::size_t pick = scores.size();
    if (std::isfinite(max_lw)) {
      double total = 0.0;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!taken[i] && std::isfinite(log_w[i])) total += std::exp(log_w[i] - max_lw);
      }
      const double u = rng.next_double() * total;
      double acc = 0.0;
      std::size_t last_open = scores.size();
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (taken[i] || !std::isfinite(log_w[i])) continue;
        last_open = i;
        acc += std::exp(log_w[i] - max_lw);
        if (u < acc) {
          pick = i;
          break;
        }
      }
      if (pick == scores.size()) pick = last_open;  // rounding tail
    } else {
      // Only zero scores remain; fill by uniform sampling.
      std::vector<std::size_t> open;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!taken[i]) open.push_back(i);
      }
      pick = open[rng.next_below(open.size())];
      ++sel.uniform_fallback;
    }

    taken[pick] = true;
    sel.ids.push_back(scores[pick].id);
  }
  return sel;
}

std::vector<std::string> select_random(std::span<const std::string> pool,
                                       std::size_t k, std::uint64_t seed) {
  if (k > pool.size()) {
    throw DataError("select_random: k=" + std::to_string(k) + " exceeds pool size " +
                    std::to_string(pool.size()));
  }
  std::vector<std::string> ids(pool.begin(), pool.end());
  std::sort(ids.begin(), ids.end());  // draw order independent of input order
  Rng rng(seed);
  // Partial Fisher-Yates: the first k slots are the sample.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.next_below(ids.size() - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  return ids;
}

}  // namespace agral
