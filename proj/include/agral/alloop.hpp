#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "agral/acquisition.hpp"
#include "agral/datasynth.hpp"
#include "agral/model.hpp"
#include "agral/rng.hpp"

namespace agral {

// Partition of the training pool into annotated and still-available IDs.
struct PoolState {
  std::vector<std::string> annotated;  // in acquisition order
  std::vector<std::string> available;

  // Throws TrainError when the partition is inconsistent with the pool.
  void check(const DatasetManifest& pool) const;
};

enum class RetrainMode { Restart, Continue };

RetrainMode retrain_mode_from_name(const std::string& name);

struct ExperimentConfig {
  AcquisitionSpec acquisition;
  std::size_t iterations = 8;
  std::size_t sample_size = 10;
  std::size_t initial_size = 10;
  std::size_t mc_samples = 20;
  double dropout_p = 0.5;
  DatasetManifest train_pool;
  DatasetManifest val_set;
  std::optional<std::filesystem::path> warm_start;
  Architecture arch;
  TrainConfig train;  // seeds are re-derived per repetition
  std::vector<std::uint64_t> repetition_seeds;
  RetrainMode retrain_mode = RetrainMode::Restart;
  std::size_t threads = 1;

  void validate() const;
};

struct LearningCurveRecord {
  std::size_t repetition = 0;
  std::size_t iteration = 0;  // 0 = after training on the initial set
  std::size_t labeled = 0;
  std::vector<double> class_iou;  // NaN where the class has zero union
  double miou = 0.0;
  std::uint64_t seed = 0;  // the repetition seed
};

struct IterationObservation {
  std::size_t repetition = 0;
  std::size_t iteration = 0;
  const PoolState& pool;
  std::span<const double> scores;  // image scores, empty for Random
};

struct ExperimentResult {
  std::vector<LearningCurveRecord> records;
  std::uint64_t mc_forward_passes = 0;      // 0 for Random acquisition
  std::size_t powerbald_uniform_fills = 0;  // selections that fell back to uniform
};

// Seed streams of one repetition; shared between run_experiment and the
// warm-start-equivalence checks.
inline std::uint64_t derive_repetition_seed(std::uint64_t master, std::size_t rep) {
  return mix_seed(master, stream::kRepetition, rep);
}
inline std::uint64_t derive_weight_seed(std::uint64_t rep_seed) {
  return mix_seed(rep_seed, stream::kWeightInit);
}
inline std::uint64_t derive_shuffle_seed(std::uint64_t rep_seed, std::size_t iteration) {
  return mix_seed(rep_seed, stream::kShuffle, iteration);
}
inline std::uint64_t derive_initial_pick_seed(std::uint64_t rep_seed) {
  return mix_seed(rep_seed, stream::kInitialPick);
}
inline std::uint64_t derive_selection_seed(std::uint64_t rep_seed, std::size_t iteration) {
  return mix_seed(rep_seed, stream::kSelect, iteration);
}
inline std::uint64_t derive_mc_seed(std::uint64_t rep_seed, std::size_t iteration) {
  return mix_seed(rep_seed, stream::kMonteCarlo, iteration);
}

// Simulated annotator: returns the stored ground-truth masks for the IDs,
// order preserved. Throws on unknown or duplicate IDs.
std::vector<Sample> annotate(const DatasetManifest& manifest,
                             std::span<const std::string> ids);

struct SamplingTelemetry {
  std::uint64_t mc_forward_passes = 0;
  std::size_t powerbald_uniform_fills = 0;
  std::vector<double> scores;  // aligned with the sorted available IDs
};

// One Sampling(...) step of the loop: scores every available image with
// mc_predict + bald_map + aggregate and applies the configured selector.
// Random acquisition never touches the model.
std::vector<std::string> sampling(const SegModel& model, const DatasetManifest& pool,
                                  std::span<const std::string> available,
                                  const AcquisitionSpec& spec, std::size_t mc_samples,
                                  std::size_t sample_size, double dropout_p,
                                  std::uint64_t selection_seed, std::uint64_t mc_seed,
                                  std::size_t threads,
                                  SamplingTelemetry* telemetry = nullptr);

// The full active-learning loop: initial random annotation, train, then
// iterate score/select/annotate/retrain/evaluate. Produces iterations+1
// records per repetition. Deterministic given the config seeds.
ExperimentResult run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(const IterationObservation&)>& observer = {});

// Evaluates with dropout disabled, accumulating one confusion matrix over
// the whole set in manifest order.
LearningCurveRecord evaluate_model(const SegModel& model, const DatasetManifest& val_set);

}  // namespace agral
