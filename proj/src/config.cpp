#include "agral/config.hpp"

#include <fstream>
#include <sstream>

#include "agral/errors.hpp"

namespace agral {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::key_help() {
  static const std::map<std::string, std::string> help = {
      // scene generation
      {"n_images", "number of images to generate"},
      {"height", "scene height in pixels (default 64)"},
      {"width", "scene width in pixels (default 64)"},
      {"profile", "fraction/texture preset: sugarbeet | cornweed | pretrain"},
      {"frac_background", "target background pixel fraction"},
      {"frac_crop", "target crop pixel fraction"},
      {"frac_weed", "target weed pixel fraction"},
      {"crop_radius_min", "crop blob radius lower bound (default 3)"},
      {"crop_radius_max", "crop blob radius upper bound (default 6)"},
      {"weed_radius_min", "weed blob radius lower bound (default 1)"},
      {"weed_radius_max", "weed blob radius upper bound (default 2)"},
      {"background_level", "mean background intensity"},
      {"noise_amplitude", "background noise amplitude"},
      {"smoothing_radius", "background noise box-blur radius"},
      {"crop_intensity", "crop blob intensity"},
      {"weed_intensity", "weed blob intensity"},
      {"tag", "distribution tag recorded in the manifest"},
      {"redundancy_factor", "duplication factor d; d-1 near-duplicates per image"},
      {"redundancy_jitter", "max translation of near-duplicates in pixels"},
      {"redundancy_noise", "noise amplitude added to near-duplicates"},
      // model / training
      {"in_channels", "image channel count (default 1)"},
      {"classes", "class count (default 3)"},
      {"hidden_channels", "comma list of hidden conv widths (default 8,16)"},
      {"epochs", "SGD epochs per training call (default 30)"},
      {"learning_rate", "SGD learning rate (default 0.05)"},
      {"batch_size", "SGD mini-batch size (default 4)"},
      // experiment
      {"acquisitions", "comma list drawn from BALD,PowerBALD,Random"},
      {"iterations", "active-learning iterations after the initial set"},
      {"sample_size", "images annotated per iteration (default 10)"},
      {"initial_size", "size of the initial random dataset (default 10)"},
      {"dropout_probability", "Monte-Carlo dropout probability (default 0.5)"},
      {"mc_samples", "Monte-Carlo iterations per image (default 20)"},
      {"temperature", "PowerBALD temperature T (default 1.0)"},
      {"aggregation", "score-map aggregation: mean | topk (default mean)"},
      {"topk_pixels", "K for topk aggregation (default 1% of pixels)"},
      {"repetitions", "replicate trials per acquisition (default 3)"},
      {"train_manifest", "path to the training-pool manifest CSV"},
      {"val_manifest", "path to the validation-set manifest CSV"},
      {"warm_start", "optional checkpoint directory to start from"},
      {"retrain_mode", "restart | continue (default restart)"},
      {"threads", "worker threads for per-image scoring (default 1)"},
      {"emit_histograms", "write per-iteration score histograms (default false)"},
      {"histogram_bins", "histogram bin count (default 20)"},
      {"histogram_lo", "histogram range lower edge (default 0)"},
      {"histogram_hi", "histogram range upper edge (default 0.1)"},
      {"seed", "master seed; --seed overrides"},
  };
  return help;
}

RunConfig RunConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_text(buf.str(), std::filesystem::absolute(path).parent_path());
}

RunConfig RunConfig::parse_text(const std::string& text,
                                const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.base_dir_ = base_dir;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + " has no '=': " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key_help().count(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    if (cfg.values_.count(key)) {
      throw ConfigError("duplicate config key '" + key + "'");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

void RunConfig::set(const std::string& key, std::string value) {
  if (!key_help().count(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = std::move(value);
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required config key '" + key + "'");
  return it->second;
}

std::string RunConfig::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: " + v);
  }
}

double RunConfig::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size() || n < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a non-negative integer: " + v);
  }
}

std::size_t RunConfig::get_size_or(const std::string& key, std::size_t fallback) const {
  return has(key) ? get_size(key) : fallback;
}

std::uint64_t RunConfig::get_u64_or(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const unsigned long long n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(n);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an unsigned integer: " + v);
  }
}

bool RunConfig::get_bool_or(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: " + v);
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  const std::string& v = get(key);
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("config key '" + key + "' is an empty list");
  return out;
}

std::filesystem::path RunConfig::get_path(const std::string& key) const {
  const std::filesystem::path p(get(key));
  return p.is_absolute() ? p : std::filesystem::absolute(base_dir_ / p);
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

}  // namespace agral
