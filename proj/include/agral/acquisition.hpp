#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "agral/tensor.hpp"

namespace agral {

enum class AcquisitionKind { Bald, PowerBald, Random };

AcquisitionKind acquisition_from_name(const std::string& name);
std::string acquisition_name(AcquisitionKind kind);

// How a per-pixel ScoreMap becomes one image score: arithmetic mean of all
// pixels, or the sum of the K largest pixel scores.
struct Aggregation {
  enum class Mode { Mean, TopK };
  Mode mode = Mode::Mean;
  std::size_t top_k = 0;  // pixel count, required when mode == TopK
};

struct AcquisitionSpec {
  AcquisitionKind kind = AcquisitionKind::Bald;
  double temperature = 1.0;  // PowerBALD only
  Aggregation aggregation;
  std::uint64_t selection_seed = 0;
};

struct ImageScore {
  std::string id;
  double score = 0.0;
  Aggregation::Mode mode = Aggregation::Mode::Mean;
};

// Shannon entropy of a class distribution, in nats, with 0 ln 0 = 0.
// Throws DataError when the input has negative entries or does not sum to 1
// within kStackNormTolerance.
double entropy(std::span<const double> dist);

// Per-pixel mutual information between the prediction and the model
// weights, estimated from the MC samples:
//   H(mean over s of p_s) - mean over s of H(p_s).
// Non-negative analytically; rounding residue is clamped to 0 unless
// clamp=false (property tests inspect the raw values).
ScoreMap bald_map(const ProbabilityStack& stack, bool clamp = true);

double aggregate(const ScoreMap& map, const Aggregation& agg);

// Top-k by score, ties broken by ascending image ID. Deterministic.
std::vector<std::string> select_bald(std::vector<ImageScore> scores, std::size_t k);

struct PowerBaldSelection {
  std::vector<std::string> ids;
  // How many picks fell back to uniform sampling because the remaining pool
  // had only zero scores; callers report this in the run log.
  std::size_t uniform_fallback = 0;
};

// Sequential sampling without replacement: at each draw, ID i is taken with
// probability score_i^(1/T) renormalized over the remaining pool.
PowerBaldSelection select_powerbald(std::vector<ImageScore> scores, std::size_t k,
                                    double temperature, std::uint64_t seed);

// Uniform sampling without replacement.
std::vector<std::string> select_random(std::span<const std::string> pool,
                                       std::size_t k, std::uint64_t seed);

}  // namespace agral
