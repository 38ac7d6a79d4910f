#include "agral/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "agral/container.hpp"
#include "agral/errors.hpp"
#include "agral/rng.hpp"

namespace agral {

namespace {

constexpr std::uint64_t kBackgroundStream = 0xB6;
constexpr std::uint64_t kCropStream = 0xC1;
constexpr std::uint64_t kWeedStream = 0xD2;

}  // namespace

void SceneConfig::validate() const {
  if (height < 8 || width < 8) throw ConfigError("scene: image dims must be >= 8");
  const double fsum = frac_background + frac_crop + frac_weed;
  if (frac_background < 0 || frac_crop < 0 || frac_weed < 0 ||
      frac_background > 1 || frac_crop > 1 || frac_weed > 1) {
    throw ConfigError("scene: class fractions must lie in [0, 1]");
  }
  if (std::fabs(fsum - 1.0) > 1e-6) {
    throw ConfigError("scene: class fractions sum to " + std::to_string(fsum) +
                      ", expected 1");
  }
  if (crop_radius_min < 1 || weed_radius_min < 1) {
    throw ConfigError("scene: blob radii must be >= 1");
  }
  if (crop_radius_max < crop_radius_min || weed_radius_max < weed_radius_min) {
    throw ConfigError("scene: radius ranges must satisfy min <= max");
  }
  const double min_dim = static_cast<double>(std::min(height, width));
  if (frac_crop > 0 && 2.0 * crop_radius_max + 2.0 >= min_dim) {
    throw ConfigError("scene: crop blobs cannot fit the target fraction in " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  if (frac_weed > 0 && 2.0 * weed_radius_max + 2.0 >= min_dim) {
    throw ConfigError("scene: weed blobs cannot fit the target fraction in " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  if (frac_crop + frac_weed > 0.5) {
    throw ConfigError("scene: crop+weed fraction above 0.5 cannot be packed "
                      "without excessive blob overlap");
  }
}

SceneConfig SceneConfig::sugarbeet_profile() {
  SceneConfig cfg;
  cfg.frac_background = 0.985;
  cfg.frac_crop = 0.013;
  cfg.frac_weed = 0.002;
  return cfg;
}

SceneConfig SceneConfig::cornweed_profile() {
  SceneConfig cfg;
  cfg.frac_background = 0.898;
  cfg.frac_crop = 0.062;
  cfg.frac_weed = 0.040;
  return cfg;
}

SceneConfig SceneConfig::pretrain_profile() {
  SceneConfig cfg = cornweed_profile();
  cfg.tag = "A-pretrain";
  cfg.background_level = 0.20;
  cfg.noise_amplitude = 0.05;
  cfg.smoothing_radius = 3;
  cfg.crop_intensity = 0.85;
  cfg.weed_intensity = 0.60;
  return cfg;
}

namespace {

struct Painter {
  std::size_t height, width;
  Image image;
  ClassMask mask;

  Painter(std::size_t h, std::size_t w) : height(h), width(w) {
    image.channels = 1;
    image.height = h;
    image.width = w;
    image.values.assign(h * w, 0.0f);
    mask.height = h;
    mask.width = w;
    mask.ids.assign(h * w, 0);
  }
};

// Pixel offsets of one blob footprint relative to its center. Crop blobs
// are plain disks; weed blobs are unions of three offset disks so their
// outline is irregular.
std::vector<std::pair<int, int>> blob_footprint(double radius, bool irregular, Rng& rng) {
  struct Disk {
    double cy, cx, r;
  };
  std::vector<Disk> disks{{0.0, 0.0, radius}};
  if (irregular) {
    for (int i = 0; i < 2; ++i) {
      const double angle = rng.next_in(0.0, 2.0 * M_PI);
      const double dist = rng.next_in(0.4, 1.0) * radius;
      disks.push_back({dist * std::sin(angle), dist * std::cos(angle), 0.7 * radius});
    }
  }
  double reach = 0.0;
  for (const auto& d : disks) {
    reach = std::max(reach, std::max(std::fabs(d.cy), std::fabs(d.cx)) + d.r);
  }
  const int r = static_cast<int>(std::ceil(reach));
  std::vector<std::pair<int, int>> px;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      for (const auto& d : disks) {
        const double dy = y - d.cy, dx = x - d.cx;
        if (dy * dy + dx * dx <= d.r * d.r) {
          px.emplace_back(y, x);
          break;
        }
      }
    }
  }
  return px;
}

// Mean footprint size of the blob family, probed with a fixed stream so the
// per-image blob-count expectation matches what gets painted.
double mean_footprint_area(double r_min, double r_max, bool irregular) {
  Rng probe(0x9F0B);
  double total = 0.0;
  constexpr int kProbes = 64;
  for (int i = 0; i < kProbes; ++i) {
    const double r = r_min + (r_max - r_min) * (i + 0.5) / kProbes;
    Rng shape(probe.next_u64());
    total += static_cast<double>(blob_footprint(r, irregular, shape).size());
  }
  return total / kProbes;
}

// Unbiased integer blob count: floor(expected) plus a Bernoulli remainder.
std::size_t draw_count(double expected, Rng& rng) {
  const double fl = std::floor(expected);
  std::size_t n = static_cast<std::size_t>(fl);
  if (rng.next_double() < expected - fl) ++n;
  return n;
}

void paint_blobs(Painter& p, const SceneConfig& cfg, std::uint8_t class_id,
                 double frac, double r_min, double r_max, double intensity,
                 bool irregular, double mean_area, Rng& rng) {
  if (frac <= 0.0) return;
  const double expected =
      frac * static_cast<double>(p.height * p.width) / mean_area;
  const std::size_t blobs = draw_count(expected, rng);
  const int margin = static_cast<int>(std::ceil(r_max * 1.8)) + 1;

  for (std::size_t b = 0; b < blobs; ++b) {
    const double radius = rng.next_in(r_min, r_max);
    Rng shape(rng.next_u64());
    const auto footprint = blob_footprint(radius, irregular, shape);
    const double blob_level =
        std::clamp(intensity + rng.next_in(-0.05, 0.05), 0.0, 1.0);

    // Rejection placement: prefer centers on untouched background so blobs
    // rarely eat each other's pixels and realized fractions track targets.
    int cy = 0, cx = 0;
    for (int attempt = 0; attempt < 24; ++attempt) {
      cy = margin + static_cast<int>(rng.next_below(p.height - 2 * margin));
      cx = margin + static_cast<int>(rng.next_below(p.width - 2 * margin));
      if (p.mask.at(cy, cx) == 0) break;
    }
    for (const auto& [dy, dx] : footprint) {
      const int y = cy + dy, x = cx + dx;
      if (y < 0 || y >= static_cast<int>(p.height) || x < 0 ||
          x >= static_cast<int>(p.width)) {
        continue;
      }
      p.mask.at(y, x) = class_id;
      const float v = static_cast<float>(
          std::clamp(blob_level + rng.next_in(-0.03, 0.03), 0.0, 1.0));
      p.image.at(0, y, x) = v;
    }
    (void)cfg;
  }
}

Painter render_scene(const SceneConfig& cfg, std::uint64_t stream_seed,
                     double crop_area, double weed_area) {
  Painter p(cfg.height, cfg.width);

  // Background: uniform noise smoothed with a box blur.
  Rng bg_rng(mix_seed(stream_seed, kBackgroundStream));
  std::vector<double> noise(cfg.height * cfg.width);
  for (auto& v : noise) v = bg_rng.next_in(-1.0, 1.0);

  const int r = static_cast<int>(cfg.smoothing_radius);
  for (std::size_t y = 0; y < cfg.height; ++y) {
    for (std::size_t x = 0; x < cfg.width; ++x) {
      double sum = 0.0;
      int count = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = static_cast<int>(y) + dy;
        if (yy < 0 || yy >= static_cast<int>(cfg.height)) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = static_cast<int>(x) + dx;
          if (xx < 0 || xx >= static_cast<int>(cfg.width)) continue;
          sum += noise[yy * cfg.width + xx];
          ++count;
        }
      }
      const double v = cfg.background_level + cfg.noise_amplitude * (sum / count);
      p.image.at(0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }

  Rng crop_rng(mix_seed(stream_seed, kCropStream));
  paint_blobs(p, cfg, 1, cfg.frac_crop, cfg.crop_radius_min, cfg.crop_radius_max,
              cfg.crop_intensity, false, crop_area, crop_rng);
  Rng weed_rng(mix_seed(stream_seed, kWeedStream));
  paint_blobs(p, cfg, 2, cfg.frac_weed, cfg.weed_radius_min, cfg.weed_radius_max,
              cfg.weed_intensity, true, weed_area, weed_rng);
  return p;
}

std::string zero_pad(std::size_t value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

const ManifestEntry& DatasetManifest::find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return e;
  }
  throw DataError("manifest: unknown image ID '" + id + "'");
}

void DatasetManifest::save(const std::filesystem::path& csv_path) const {
  const auto dir = csv_path.parent_path();
  const auto tmp = dir / (csv_path.filename().string() + ".tmp");
  std::ofstream f(tmp, std::ios::trunc);
  if (!f) throw DataError("cannot write " + tmp.string());
  f << "id,image_path,mask_path,tag,group\n";
  for (const auto& e : entries) {
    f << e.id << ',' << std::filesystem::relative(e.image_path, dir).generic_string()
      << ',' << std::filesystem::relative(e.mask_path, dir).generic_string() << ','
      << e.tag << ',' << e.group << '\n';
  }
  f.close();
  std::filesystem::rename(tmp, csv_path);
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& csv_path) {
  std::ifstream f(csv_path);
  if (!f) throw DataError("cannot open manifest " + csv_path.string());
  const auto dir = std::filesystem::absolute(csv_path).parent_path();

  DatasetManifest manifest;
  std::string line;
  if (!std::getline(f, line) || line != "id,image_path,mask_path,tag,group") {
    throw DataError("manifest " + csv_path.string() +
                    " does not start with the expected header");
  }
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) {
      throw DataError("manifest row with " + std::to_string(fields.size()) +
                      " fields: " + line);
    }
    ManifestEntry e;
    e.id = fields[0];
    e.image_path = dir / fields[1];
    e.mask_path = dir / fields[2];
    e.tag = fields[3];
    e.group = fields[4];
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

DatasetManifest generate_dataset(const SceneConfig& cfg, std::size_t n,
                                 const std::filesystem::path& out_dir) {
  cfg.validate();
  if (n < 1) throw ConfigError("generate: image count must be >= 1");
  std::filesystem::create_directories(out_dir);

  const double crop_area =
      mean_footprint_area(cfg.crop_radius_min, cfg.crop_radius_max, false);
  const double weed_area =
      mean_footprint_area(cfg.weed_radius_min, cfg.weed_radius_max, true);

  DatasetManifest manifest;
  for (std::size_t i = 0; i < n; ++i) {
    const auto painter = render_scene(cfg, mix_seed(cfg.seed, i), crop_area, weed_area);
    ManifestEntry e;
    e.id = zero_pad(i, 6);
    e.image_path = out_dir / ("img_" + e.id + ".alts");
    e.mask_path = out_dir / ("msk_" + e.id + ".alts");
    e.tag = cfg.tag;
    e.group = e.id;
    write_container(e.image_path, painter.image.to_tensor(),
                    {{"kind", "image"}, {"tag", cfg.tag}});
    write_container(e.mask_path, painter.mask.to_tensor(),
                    {{"kind", "mask"}, {"tag", cfg.tag}});
    manifest.entries.push_back(std::move(e));
  }
  manifest.save(out_dir / "manifest.csv");
  return manifest;
}

std::vector<double> class_stats(const DatasetManifest& manifest, std::size_t classes) {
  if (manifest.entries.empty()) throw DataError("class_stats: empty manifest");
  std::vector<std::uint64_t> counts(classes, 0);
  std::uint64_t total = 0;
  for (const auto& e : manifest.entries) {
    const auto [tensor, meta] = read_container(e.mask_path);
    (void)meta;
    const ClassMask mask = ClassMask::from_tensor(tensor);
    for (auto id : mask.ids) {
      if (id >= classes) {
        throw DataError("class_stats: mask value " + std::to_string(id) +
                        " >= class count in " + e.mask_path.string());
      }
      ++counts[id];
      ++total;
    }
  }
  std::vector<double> fractions(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    fractions[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
  }
  return fractions;
}

DatasetManifest inject_redundancy(const DatasetManifest& manifest,
                                  const RedundancyConfig& cfg,
                                  const std::filesystem::path& out_dir) {
  if (cfg.duplication < 1) throw ConfigError("redundancy: duplication factor must be >= 1");
  if (cfg.duplication == 1) return manifest;
  std::filesystem::create_directories(out_dir);

  DatasetManifest out;
  for (const auto& src : manifest.entries) {
    out.entries.push_back(src);

    const auto [img_t, img_meta] = read_container(src.image_path);
    const auto [msk_t, msk_meta] = read_container(src.mask_path);
    const Image image = Image::from_tensor(img_t);
    const ClassMask mask = ClassMask::from_tensor(msk_t);
    if (cfg.jitter >= std::min(image.height, image.width)) {
      throw DataError("redundancy: jitter " + std::to_string(cfg.jitter) +
                      " is larger than the image dims");
    }

    for (std::size_t k = 1; k < cfg.duplication; ++k) {
      Rng rng(mix_seed(cfg.seed, hash_id(src.id), k));
      const int j = static_cast<int>(cfg.jitter);
      const int dy = j > 0 ? static_cast<int>(rng.next_below(2 * j + 1)) - j : 0;
      const int dx = j > 0 ? static_cast<int>(rng.next_below(2 * j + 1)) - j : 0;

      Image dup_img = image;
      ClassMask dup_msk = mask;
      const int h = static_cast<int>(image.height), w = static_cast<int>(image.width);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int sy = ((y - dy) % h + h) % h;  // circular shift
          const int sx = ((x - dx) % w + w) % w;
          for (std::size_t c = 0; c < image.channels; ++c) {
            dup_img.at(c, y, x) = image.at(c, sy, sx);
          }
          dup_msk.at(y, x) = mask.at(sy, sx);
        }
      }
      if (cfg.noise_amplitude > 0.0) {
        for (auto& v : dup_img.values) {
          v = static_cast<float>(std::clamp(
              static_cast<double>(v) + rng.next_in(-cfg.noise_amplitude, cfg.noise_amplitude),
              0.0, 1.0));
        }
      }

      ManifestEntry e;
      e.id = src.id + "_r" + std::to_string(k);
      e.image_path = out_dir / ("img_" + e.id + ".alts");
      e.mask_path = out_dir / ("msk_" + e.id + ".alts");
      e.tag = src.tag;
      e.group = src.group;
      write_container(e.image_path, dup_img.to_tensor(), img_meta);
      write_container(e.mask_path, dup_msk.to_tensor(), msk_meta);
      out.entries.push_back(std::move(e));
    }
  }
  out.save(out_dir / "manifest.csv");
  return out;
}

}  // namespace agral
