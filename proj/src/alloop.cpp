#include "agral/alloop.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "agral/container.hpp"
#include "agral/errors.hpp"
#include "agral/metrics.hpp"
#include "agral/parallel.hpp"

namespace agral {

void PoolState::check(const DatasetManifest& pool) const {
  std::unordered_set<std::string> seen;
  for (const auto& id : annotated) {
    if (!seen.insert(id).second) {
      throw TrainError("pool state: ID '" + id + "' annotated twice");
    }
  }
  for (const auto& id : available) {
    if (!seen.insert(id).second) {
      throw TrainError("pool state: ID '" + id + "' both annotated and available");
    }
  }
  if (seen.size() != pool.entries.size()) {
    throw TrainError("pool state: partition covers " + std::to_string(seen.size()) +
                     " IDs, pool has " + std::to_string(pool.entries.size()));
  }
  for (const auto& e : pool.entries) {
    if (!seen.count(e.id)) {
      throw TrainError("pool state: pool ID '" + e.id + "' missing from partition");
    }
  }
}

RetrainMode retrain_mode_from_name(const std::string& name) {
  if (name == "restart") return RetrainMode::Restart;
  if (name == "continue") return RetrainMode::Continue;
  throw ConfigError("unknown retrain_mode '" + name + "' (expected restart or continue)");
}

void ExperimentConfig::validate() const {
  arch.validate();
  if (sample_size < 1) throw ConfigError("experiment: sample size must be >= 1");
  if (initial_size < 1) throw ConfigError("experiment: initial dataset size must be >= 1");
  if (initial_size + iterations * sample_size > train_pool.entries.size()) {
    throw ConfigError("experiment: initial size " + std::to_string(initial_size) + " + " +
                      std::to_string(iterations) + " x " + std::to_string(sample_size) +
                      " exceeds the training pool (" +
                      std::to_string(train_pool.entries.size()) + " images)");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ConfigError("experiment: dropout probability must lie in [0, 1)");
  }
  if (mc_samples < 1) throw ConfigError("experiment: Monte-Carlo iteration count must be >= 1");
  if (!(train.learning_rate > 0.0)) throw ConfigError("experiment: learning rate must be > 0");
  if (train.epochs < 1) throw ConfigError("experiment: epochs must be >= 1");
  if (val_set.entries.empty()) throw ConfigError("experiment: validation set is empty");
  if (repetition_seeds.empty()) throw ConfigError("experiment: no repetition seeds");
  if (acquisition.kind == AcquisitionKind::PowerBald && !(acquisition.temperature > 0.0)) {
    throw ConfigError("experiment: PowerBALD temperature must be > 0");
  }
}

namespace {

Sample load_sample(const ManifestEntry& entry) {
  const auto [img_t, img_meta] = read_container(entry.image_path);
  const auto [msk_t, msk_meta] = read_container(entry.mask_path);
  (void)img_meta;
  (void)msk_meta;
  return Sample{Image::from_tensor(img_t), ClassMask::from_tensor(msk_t)};
}

}  // namespace

std::vector<Sample> annotate(const DatasetManifest& manifest,
                             std::span<const std::string> ids) {
  std::unordered_set<std::string> seen;
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    if (!seen.insert(id).second) {
      throw DataError("annotate: duplicate ID '" + id + "' in request");
    }
    out.push_back(load_sample(manifest.find(id)));
  }
  return out;
}

std::vector<std::string> sampling(const SegModel& model, const DatasetManifest& pool,
                                  std::span<const std::string> available,
                                  const AcquisitionSpec& spec, std::size_t mc_samples,
                                  std::size_t sample_size, double dropout_p,
                                  std::uint64_t selection_seed, std::uint64_t mc_seed,
                                  std::size_t threads, SamplingTelemetry* telemetry) {
  if (sample_size > available.size()) {
    throw DataError("sampling: sample size " + std::to_string(sample_size) +
                    " exceeds the available pool (" + std::to_string(available.size()) + ")");
  }

  if (spec.kind == AcquisitionKind::Random) {
    return select_random(available, sample_size, selection_seed);
  }

  std::vector<std::string> ids(available.begin(), available.end());
  std::sort(ids.begin(), ids.end());

  std::vector<ImageScore> scores(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    const auto& entry = pool.find(ids[i]);
    const auto [img_t, img_meta] = read_container(entry.image_path);
    (void)img_meta;
    const Image image = Image::from_tensor(img_t);

    Aggregation agg = spec.aggregation;
    if (agg.mode == Aggregation::Mode::TopK && agg.top_k == 0) {
      agg.top_k = std::max<std::size_t>(1, image.height * image.width / 100);
    }

    const auto stack = mc_predict(model, image, mc_samples, dropout_p,
                                  mix_seed(mc_seed, hash_id(ids[i])));
    scores[i] = {ids[i], aggregate(bald_map(stack), agg), agg.mode};
  });

  if (telemetry) {
    telemetry->mc_forward_passes +=
        static_cast<std::uint64_t>(ids.size()) * mc_samples;
    telemetry->scores.clear();
    for (const auto& s : scores) telemetry->scores.push_back(s.score);
  }

  if (spec.kind == AcquisitionKind::Bald) {
    return select_bald(std::move(scores), sample_size);
  }
  auto sel = select_powerbald(std::move(scores), sample_size, spec.temperature,
                              selection_seed);
  if (telemetry) telemetry->powerbald_uniform_fills += sel.uniform_fallback;
  return std::move(sel.ids);
}

LearningCurveRecord evaluate_model(const SegModel& model, const DatasetManifest& val_set) {
  ConfusionMatrix cm(model.arch.class_count);
  for (const auto& entry : val_set.entries) {
    const Sample sample = load_sample(entry);
    const auto stack = predict(model, sample.image);
    cm += confusion(argmax_mask(stack), sample.mask, model.arch.class_count);
  }
  const IouResult iou = miou(cm);
  LearningCurveRecord record;
  record.class_iou = iou.per_class;
  record.miou = iou.mean;
  return record;
}

ExperimentResult run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(const IterationObservation&)>& observer) {
  cfg.validate();

  ExperimentResult result;
  for (std::size_t rep = 0; rep < cfg.repetition_seeds.size(); ++rep) {
    const std::uint64_t rep_seed = cfg.repetition_seeds[rep];

    const SegModel base = cfg.warm_start
                              ? load_checkpoint(*cfg.warm_start)
                              : init_model(cfg.arch, derive_weight_seed(rep_seed));

    std::vector<std::string> pool_ids;
    for (const auto& e : cfg.train_pool.entries) pool_ids.push_back(e.id);

    PoolState state;
    state.annotated = select_random(pool_ids, cfg.initial_size,
                                    derive_initial_pick_seed(rep_seed));
    {
      const std::set<std::string> picked(state.annotated.begin(), state.annotated.end());
      for (const auto& id : pool_ids) {
        if (!picked.count(id)) state.available.push_back(id);
      }
    }
    state.check(cfg.train_pool);

    // The cumulative annotated set is trained in sorted-ID order so that the
    // result depends on membership only, not on acquisition order.
    auto train_current = [&](const SegModel& from, std::size_t iteration) {
      std::vector<std::string> sorted(state.annotated);
      std::sort(sorted.begin(), sorted.end());
      const auto samples = annotate(cfg.train_pool, sorted);
      TrainConfig tc = cfg.train;
      tc.weight_init_seed = derive_weight_seed(rep_seed);
      tc.shuffle_seed = derive_shuffle_seed(rep_seed, iteration);
      try {
        return train(from, samples, tc).model;
      } catch (const DataError& e) {
        throw TrainError("training failed at repetition " + std::to_string(rep) +
                         ", iteration " + std::to_string(iteration) + ": " + e.what());
      }
    };

    SegModel model = train_current(base, 0);

    auto record_point = [&](std::size_t iteration) {
      LearningCurveRecord record = evaluate_model(model, cfg.val_set);
      record.repetition = rep;
      record.iteration = iteration;
      record.labeled = state.annotated.size();
      record.seed = rep_seed;
      result.records.push_back(std::move(record));
    };
    record_point(0);
    if (observer) observer({rep, 0, state, {}});

    for (std::size_t iter = 1; iter <= cfg.iterations; ++iter) {
      SamplingTelemetry telemetry;
      const auto picked =
          sampling(model, cfg.train_pool, state.available, cfg.acquisition,
                   cfg.mc_samples, cfg.sample_size, cfg.dropout_p,
                   derive_selection_seed(rep_seed, iter), derive_mc_seed(rep_seed, iter),
                   cfg.threads, &telemetry);
      result.mc_forward_passes += telemetry.mc_forward_passes;
      result.powerbald_uniform_fills += telemetry.powerbald_uniform_fills;

      for (const auto& id : picked) {
        const auto it = std::find(state.available.begin(), state.available.end(), id);
        if (it == state.available.end()) {
          throw TrainError("sampling returned ID '" + id + "' not in the available pool");
        }
        state.annotated.push_back(id);
        state.available.erase(it);
      }
      state.check(cfg.train_pool);

      model = train_current(cfg.retrain_mode == RetrainMode::Restart ? base : model, iter);
      record_point(iter);
      if (observer) observer({rep, iter, state, telemetry.scores});
    }
  }
  return result;
}

}  // namespace agral
