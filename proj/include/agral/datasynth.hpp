#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "agral/tensor.hpp"

namespace agral {

// Parameters of one synthetic crop/weed scene distribution. Crops are large
// disks, weeds small irregular blobs, the background is smoothed noise.
// The pre-train and field distributions differ in background level, noise
// amplitude and blob intensities.
struct SceneConfig {
  std::size_t height = 64;
  std::size_t width = 64;

  // Target pixel fractions; must sum to 1.
  double frac_background = 0.898;
  double frac_crop = 0.062;
  double frac_weed = 0.040;

  double crop_radius_min = 3.0;
  double crop_radius_max = 6.0;
  double weed_radius_min = 1.0;
  double weed_radius_max = 2.0;

  double background_level = 0.42;
  double noise_amplitude = 0.18;
  std::size_t smoothing_radius = 2;

  double crop_intensity = 0.62;
  double weed_intensity = 0.30;

  std::string tag = "B-field";
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError, including unsatisfiable targets

  // Table-profile presets: Sugarbeet 98.5/1.3/0.2, Corn-Weed 89.8/6.2/4.0.
  static SceneConfig sugarbeet_profile();
  static SceneConfig cornweed_profile();
  // "A-pretrain" texture: darker, smoother soil and brighter plants.
  static SceneConfig pretrain_profile();
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path image_path;  // absolute once loaded/generated
  std::filesystem::path mask_path;
  std::string tag;
  std::string group;  // redundancy-group ID
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  const ManifestEntry& find(const std::string& id) const;

  // CSV with header id,image_path,mask_path,tag,group; paths are stored
  // relative to the manifest file.
  void save(const std::filesystem::path& csv_path) const;
  static DatasetManifest load(const std::filesystem::path& csv_path);
};

// Generates n image/mask pairs under out_dir plus a manifest.csv.
// Deterministic given cfg.seed; per-image streams are derived from the
// image index, so generation order does not matter.
DatasetManifest generate_dataset(const SceneConfig& cfg, std::size_t n,
                                 const std::filesystem::path& out_dir);

// Pixel fractions per class over all masks of the manifest; sums to 1.
std::vector<double> class_stats(const DatasetManifest& manifest,
                                std::size_t classes = 3);

struct RedundancyConfig {
  std::size_t duplication = 1;  // d; each source gains d-1 near-duplicates
  std::size_t jitter = 2;       // max circular translation in pixels
  double noise_amplitude = 0.01;
  std::uint64_t seed = 0;
};

// Near-duplicates share the source's redundancy-group ID; masks are jittered
// identically to their images.
DatasetManifest inject_redundancy(const DatasetManifest& manifest,
                                  const RedundancyConfig& cfg,
                                  const std::filesystem::path& out_dir);

}  // namespace agral
