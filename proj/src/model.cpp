#include "agral/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "agral/container.hpp"
#include "agral/errors.hpp"
#include "agral/rng.hpp"

namespace agral {

Architecture Architecture::standard(std::size_t in_channels, std::size_t class_count,
                                    std::vector<std::size_t> hidden, double dropout_p) {
  Architecture arch;
  arch.in_channels = in_channels;
  arch.class_count = class_count;
  arch.default_dropout = dropout_p;
  for (std::size_t ch : hidden) {
    arch.layers.push_back({LayerKind::Conv3x3, ch});
    arch.layers.push_back({LayerKind::Relu, 0});
  }
  arch.layers.push_back({LayerKind::Dropout, 0});
  arch.layers.push_back({LayerKind::Conv1x1, class_count});
  return arch;
}

void Architecture::validate() const {
  if (class_count < 2) throw ConfigError("architecture: class count must be >= 2");
  if (in_channels < 1) throw ConfigError("architecture: input channel count must be >= 1");
  if (layers.size() < 2) throw ConfigError("architecture: needs at least dropout + classifier");

  std::size_t dropout_count = 0;
  std::size_t dropout_pos = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.kind == LayerKind::Dropout) {
      ++dropout_count;
      dropout_pos = i;
    }
    if ((l.kind == LayerKind::Conv3x3 || l.kind == LayerKind::Conv1x1) && l.channels < 1) {
      throw ConfigError("architecture: conv layer with zero channels");
    }
  }
  if (dropout_count == 0) throw ConfigError("architecture: no dropout layer");
  if (dropout_count > 1) throw ConfigError("architecture: more than one dropout layer");
  if (layers.back().kind != LayerKind::Conv1x1) {
    throw ConfigError("architecture: final layer must be the 1x1 classifier conv");
  }
  if (dropout_pos + 2 != layers.size()) {
    throw ConfigError("architecture: dropout must sit immediately before the final conv");
  }
  if (layers.back().channels != class_count) {
    throw ConfigError("architecture: final conv channels must equal the class count");
  }
}

std::string Architecture::layer_string() const {
  std::string out;
  for (const auto& l : layers) {
    if (!out.empty()) out += ',';
    switch (l.kind) {
      case LayerKind::Conv3x3: out += "conv3x3:" + std::to_string(l.channels); break;
      case LayerKind::Relu: out += "relu"; break;
      case LayerKind::Dropout: out += "dropout"; break;
      case LayerKind::Conv1x1: out += "conv1x1:" + std::to_string(l.channels); break;
    }
  }
  return out;
}

std::vector<LayerSpec> Architecture::parse_layers(const std::string& text) {
  std::vector<LayerSpec> layers;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "relu") {
      layers.push_back({LayerKind::Relu, 0});
    } else if (item == "dropout") {
      layers.push_back({LayerKind::Dropout, 0});
    } else if (item.rfind("conv3x3:", 0) == 0) {
      layers.push_back({LayerKind::Conv3x3, std::stoul(item.substr(8))});
    } else if (item.rfind("conv1x1:", 0) == 0) {
      layers.push_back({LayerKind::Conv1x1, std::stoul(item.substr(8))});
    } else {
      throw ConfigError("architecture: unknown layer '" + item + "'");
    }
  }
  return layers;
}

namespace {

double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Channel count flowing out of layer i.
std::size_t layer_out_channels(const Architecture& arch, std::size_t upto) {
  std::size_t ch = arch.in_channels;
  for (std::size_t i = 0; i <= upto && i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    if (l.kind == LayerKind::Conv3x3 || l.kind == LayerKind::Conv1x1) ch = l.channels;
  }
  return ch;
}

void conv_forward(const ConvWeights& cw, const std::vector<double>& in,
                  std::vector<double>& out, std::size_t height, std::size_t width) {
  const std::size_t k = cw.kernel;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = height * width;
  out.assign(cw.out_ch * hw, 0.0);

  for (std::size_t o = 0; o < cw.out_ch; ++o) {
    double* dst = out.data() + o * hw;
    for (std::size_t px = 0; px < hw; ++px) dst[px] = cw.b[o];
    for (std::size_t i = 0; i < cw.in_ch; ++i) {
      const double* src = in.data() + i * hw;
      const double* wk = cw.w.data() + (o * cw.in_ch + i) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
          const double wv = wk[ky * k + kx];
          if (wv == 0.0) continue;
          const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
          const std::ptrdiff_t y1 =
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(height), static_cast<std::ptrdiff_t>(height) - dy);
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 =
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(width), static_cast<std::ptrdiff_t>(width) - dx);
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            double* drow = dst + y * static_cast<std::ptrdiff_t>(width);
            const double* srow = src + (y + dy) * static_cast<std::ptrdiff_t>(width) + dx;
            for (std::ptrdiff_t x = x0; x < x1; ++x) drow[x] += wv * srow[x];
          }
        }
      }
    }
  }
}

// Gradients wrt weights and the layer input, given dL/d(out).
void conv_backward(const ConvWeights& cw, const std::vector<double>& in,
                   const std::vector<double>& d_out, std::size_t height,
                   std::size_t width, LayerGrads* grads, std::vector<double>* d_in) {
  const std::size_t k = cw.kernel;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = height * width;

  if (d_in) d_in->assign(cw.in_ch * hw, 0.0);

  for (std::size_t o = 0; o < cw.out_ch; ++o) {
    const double* dout = d_out.data() + o * hw;
    if (grads) {
      double db = 0.0;
      for (std::size_t px = 0; px < hw; ++px) db += dout[px];
      grads->b[o] += db;
    }
    for (std::size_t i = 0; i < cw.in_ch; ++i) {
      const double* src = in.data() + i * hw;
      const double* wk = cw.w.data() + (o * cw.in_ch + i) * k * k;
      double* gk = grads ? grads->w.data() + (o * cw.in_ch + i) * k * k : nullptr;
      double* din = d_in ? d_in->data() + i * hw : nullptr;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
          const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
          const std::ptrdiff_t y1 =
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(height), static_cast<std::ptrdiff_t>(height) - dy);
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 =
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(width), static_cast<std::ptrdiff_t>(width) - dx);
          double gw = 0.0;
          const double wv = wk[ky * k + kx];
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            const double* drow = dout + y * static_cast<std::ptrdiff_t>(width);
            const double* srow = src + (y + dy) * static_cast<std::ptrdiff_t>(width) + dx;
            double* irow = din ? din + (y + dy) * static_cast<std::ptrdiff_t>(width) + dx : nullptr;
            for (std::ptrdiff_t x = x0; x < x1; ++x) {
              gw += drow[x] * srow[x];
              if (irow) irow[x] += wv * drow[x];
            }
          }
          if (gk) gk[ky * k + kx] += gw;
        }
      }
    }
  }
}

struct ForwardTrace {
  // acts[0] is the input image; acts[i+1] the output of layer i.
  std::vector<std::vector<double>> acts;
  std::vector<double> probs;  // per-pixel softmax of the final logits (c, h, w)
};

// Runs the layer list. dropout_mask, when non-null, is applied element-wise
// at the dropout layer (inverted-dropout scale baked into the mask).
void forward_pass(const SegModel& model, const Image& image,
                  const std::vector<double>* dropout_mask, ForwardTrace& trace) {
  const std::size_t hw = image.height * image.width;
  trace.acts.assign(model.arch.layers.size() + 1, {});
  trace.acts[0].resize(image.values.size());
  for (std::size_t i = 0; i < image.values.size(); ++i) {
    trace.acts[0][i] = static_cast<double>(image.values[i]);
  }

  std::size_t conv_idx = 0;
  for (std::size_t li = 0; li < model.arch.layers.size(); ++li) {
    const auto& spec = model.arch.layers[li];
    const auto& in = trace.acts[li];
    auto& out = trace.acts[li + 1];
    switch (spec.kind) {
      case LayerKind::Conv3x3:
      case LayerKind::Conv1x1:
        conv_forward(model.convs[conv_idx++], in, out, image.height, image.width);
        break;
      case LayerKind::Relu:
        out.resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
        break;
      case LayerKind::Dropout:
        out = in;
        if (dropout_mask) {
          for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*dropout_mask)[i];
        }
        break;
    }
  }

  // Per-pixel softmax over the logits.
  const auto& logits = trace.acts.back();
  const std::size_t classes = model.arch.class_count;
  trace.probs.resize(logits.size());
  for (std::size_t px = 0; px < hw; ++px) {
    double mx = logits[px];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, logits[c * hw + px]);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double e = std::exp(logits[c * hw + px] - mx);
      trace.probs[c * hw + px] = e;
      sum += e;
    }
    for (std::size_t c = 0; c < classes; ++c) trace.probs[c * hw + px] /= sum;
  }
}

void check_image(const SegModel& model, const Image& image) {
  if (image.channels != model.arch.in_channels) {
    throw DataError("image channel count " + std::to_string(image.channels) +
                    " does not match the architecture (" +
                    std::to_string(model.arch.in_channels) + ")");
  }
  if (image.height < 1 || image.width < 1 ||
      image.values.size() != image.channels * image.height * image.width) {
    throw DataError("image dimensions are inconsistent with its payload");
  }
}

ProbabilityStack stack_from_probs(std::span<const std::vector<double>> runs,
                                  std::size_t classes, std::size_t height,
                                  std::size_t width) {
  ProbabilityStack stack;
  stack.samples = runs.size();
  stack.classes = classes;
  stack.height = height;
  stack.width = width;
  stack.values.resize(runs.size() * classes * height * width);
  std::size_t pos = 0;
  for (const auto& probs : runs) {
    for (double p : probs) stack.values[pos++] = static_cast<float>(p);
  }
  return stack;
}

}  // namespace

SegModel init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  SegModel model;
  model.arch = arch;

  std::size_t in_ch = arch.in_channels;
  std::size_t conv_idx = 0;
  for (const auto& spec : arch.layers) {
    if (spec.kind != LayerKind::Conv3x3 && spec.kind != LayerKind::Conv1x1) continue;
    const std::size_t k = spec.kind == LayerKind::Conv3x3 ? 3 : 1;
    ConvWeights cw;
    cw.out_ch = spec.channels;
    cw.in_ch = in_ch;
    cw.kernel = k;
    cw.w.resize(cw.out_ch * cw.in_ch * k * k);
    cw.b.assign(cw.out_ch, 0.0);

    const double fan_in = static_cast<double>(cw.in_ch * k * k);
    const double limit = std::sqrt(6.0 / fan_in);
    Rng rng(mix_seed(seed, conv_idx));
    for (auto& v : cw.w) v = snap_f32(rng.next_in(-limit, limit));

    model.convs.push_back(std::move(cw));
    in_ch = spec.channels;
    ++conv_idx;
  }
  return model;
}

double loss_and_gradients(const SegModel& model, const Sample& sample,
                          std::vector<LayerGrads>* grads) {
  check_image(model, sample.image);
  if (sample.mask.height != sample.image.height ||
      sample.mask.width != sample.image.width) {
    throw DataError("mask dimensions do not match the image");
  }
  const std::size_t classes = model.arch.class_count;
  const std::size_t hw = sample.image.height * sample.image.width;
  for (auto id : sample.mask.ids) {
    if (id >= classes) {
      throw DataError("mask class id " + std::to_string(id) + " >= class count " +
                      std::to_string(classes));
    }
  }

  ForwardTrace trace;
  forward_pass(model, sample.image, nullptr, trace);

  double loss = 0.0;
  for (std::size_t px = 0; px < hw; ++px) {
    const double p = trace.probs[sample.mask.ids[px] * hw + px];
    loss -= std::log(std::max(p, 1e-300));
  }
  loss /= static_cast<double>(hw);

  if (!grads) return loss;

  // d(mean pixel CE)/d(logit) = (softmax - onehot) / (H*W)
  std::vector<double> delta(trace.probs);
  const double inv_hw = 1.0 / static_cast<double>(hw);
  for (std::size_t px = 0; px < hw; ++px) {
    delta[sample.mask.ids[px] * hw + px] -= 1.0;
  }
  for (auto& v : delta) v *= inv_hw;

  std::size_t conv_idx = model.convs.size();
  std::vector<double> d_next;
  for (std::size_t li = model.arch.layers.size(); li-- > 0;) {
    const auto& spec = model.arch.layers[li];
    const auto& in = trace.acts[li];
    switch (spec.kind) {
      case LayerKind::Conv3x3:
      case LayerKind::Conv1x1: {
        --conv_idx;
        conv_backward(model.convs[conv_idx], in, delta, sample.image.height,
                      sample.image.width, &(*grads)[conv_idx], li > 0 ? &d_next : nullptr);
        if (li > 0) delta.swap(d_next);
        break;
      }
      case LayerKind::Relu:
        for (std::size_t i = 0; i < delta.size(); ++i) {
          if (in[i] <= 0.0) delta[i] = 0.0;
        }
        break;
      case LayerKind::Dropout:
        break;  // identity during training and deterministic inference
    }
  }
  return loss;
}

std::vector<LayerGrads> zero_gradients(const SegModel& model) {
  std::vector<LayerGrads> grads(model.convs.size());
  for (std::size_t i = 0; i < model.convs.size(); ++i) {
    grads[i].w.assign(model.convs[i].w.size(), 0.0);
    grads[i].b.assign(model.convs[i].b.size(), 0.0);
  }
  return grads;
}

TrainResult train(const SegModel& start, std::span<const Sample> data,
                  const TrainConfig& cfg) {
  if (data.empty()) throw DataError("train: empty dataset");
  if (!(cfg.learning_rate >= 0.0)) throw ConfigError("train: learning rate must be >= 0");
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch size must be >= 1");

  TrainResult result{start, {}};
  SegModel& model = result.model;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.shuffle_seed, epoch));
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::size_t j = i + rng.next_below(order.size() - i);
      std::swap(order[i], order[j]);
    }

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      auto grads = zero_gradients(model);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        batch_loss += loss_and_gradients(model, data[order[i]], &grads);
      }
      const double scale = cfg.learning_rate / static_cast<double>(end - begin);
      for (std::size_t l = 0; l < model.convs.size(); ++l) {
        auto& cw = model.convs[l];
        for (std::size_t i = 0; i < cw.w.size(); ++i) {
          cw.w[i] = snap_f32(cw.w[i] - scale * grads[l].w[i]);
        }
        for (std::size_t i = 0; i < cw.b.size(); ++i) {
          cw.b[i] = snap_f32(cw.b[i] - scale * grads[l].b[i]);
        }
      }
      epoch_loss += batch_loss;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

ProbabilityStack predict(const SegModel& model, const Image& image) {
  check_image(model, image);
  ForwardTrace trace;
  forward_pass(model, image, nullptr, trace);
  const std::vector<std::vector<double>> runs{std::move(trace.probs)};
  return stack_from_probs(runs, model.arch.class_count, image.height, image.width);
}

ProbabilityStack mc_predict(const SegModel& model, const Image& image,
                            std::size_t samples, double dropout_p,
                            std::uint64_t seed) {
  check_image(model, image);
  if (samples < 1) throw DataError("mc_predict: sample count must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw DataError("mc_predict: dropout probability must lie in [0, 1)");
  }

  std::size_t dropout_layer = 0;
  for (std::size_t i = 0; i < model.arch.layers.size(); ++i) {
    if (model.arch.layers[i].kind == LayerKind::Dropout) dropout_layer = i;
  }
  const std::size_t mask_channels =
      layer_out_channels(model.arch, dropout_layer);
  const std::size_t mask_size = mask_channels * image.height * image.width;
  const double keep_scale = 1.0 / (1.0 - dropout_p);

  std::vector<std::vector<double>> runs(samples);
  std::vector<double> mask(mask_size);
  for (std::size_t s = 0; s < samples; ++s) {
    Rng rng(mix_seed(seed, s));
    for (auto& m : mask) {
      m = (dropout_p > 0.0 && rng.next_double() < dropout_p) ? 0.0 : keep_scale;
    }
    ForwardTrace trace;
    forward_pass(model, image, &mask, trace);
    runs[s] = std::move(trace.probs);
  }
  return stack_from_probs(runs, model.arch.class_count, image.height, image.width);
}

void save_checkpoint(const SegModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    const auto tmp = dir / "model.meta.tmp";
    std::ofstream meta(tmp, std::ios::trunc);
    if (!meta) throw DataError("cannot write " + tmp.string());
    meta << "format = agral-checkpoint-v1\n";
    meta << "in_channels = " << model.arch.in_channels << "\n";
    meta << "classes = " << model.arch.class_count << "\n";
    meta << "layers = " << model.arch.layer_string() << "\n";
    meta << "default_dropout = " << model.arch.default_dropout << "\n";
    meta.close();
    std::filesystem::rename(tmp, dir / "model.meta");
  }
  for (std::size_t i = 0; i < model.convs.size(); ++i) {
    const auto& cw = model.convs[i];
    Tensor w = Tensor::zeros_f32({cw.out_ch, cw.in_ch, cw.kernel, cw.kernel});
    for (std::size_t j = 0; j < cw.w.size(); ++j) w.f32[j] = static_cast<float>(cw.w[j]);
    write_container(dir / ("weight_" + std::to_string(i) + ".alts"), w,
                    {{"tensor", "conv_weight"}, {"layer", std::to_string(i)}});
    Tensor b = Tensor::zeros_f32({cw.out_ch});
    for (std::size_t j = 0; j < cw.b.size(); ++j) b.f32[j] = static_cast<float>(cw.b[j]);
    write_container(dir / ("bias_" + std::to_string(i) + ".alts"), b,
                    {{"tensor", "conv_bias"}, {"layer", std::to_string(i)}});
  }
}

SegModel load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "model.meta");
  if (!meta) throw DataError("checkpoint: cannot open " + (dir / "model.meta").string());

  Architecture arch;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "in_channels") arch.in_channels = std::stoul(value);
    else if (key == "classes") arch.class_count = std::stoul(value);
    else if (key == "layers") arch.layers = Architecture::parse_layers(value);
    else if (key == "default_dropout") arch.default_dropout = std::stod(value);
  }
  arch.validate();

  SegModel model;
  model.arch = arch;
  std::size_t in_ch = arch.in_channels;
  std::size_t conv_idx = 0;
  for (const auto& spec : arch.layers) {
    if (spec.kind != LayerKind::Conv3x3 && spec.kind != LayerKind::Conv1x1) continue;
    const std::size_t k = spec.kind == LayerKind::Conv3x3 ? 3 : 1;
    const auto [wt, wmeta] =
        read_container(dir / ("weight_" + std::to_string(conv_idx) + ".alts"));
    const auto [bt, bmeta] =
        read_container(dir / ("bias_" + std::to_string(conv_idx) + ".alts"));
    (void)wmeta;
    (void)bmeta;
    ConvWeights cw;
    cw.out_ch = spec.channels;
    cw.in_ch = in_ch;
    cw.kernel = k;
    if (wt.dims != std::vector<std::uint64_t>{cw.out_ch, cw.in_ch, k, k}) {
      throw DataError("checkpoint: weight tensor " + std::to_string(conv_idx) +
                      " has unexpected dims");
    }
    cw.w.assign(wt.f32.begin(), wt.f32.end());
    cw.b.assign(bt.f32.begin(), bt.f32.end());
    model.convs.push_back(std::move(cw));
    in_ch = spec.channels;
    ++conv_idx;
  }
  return model;
}

}  // namespace agral
