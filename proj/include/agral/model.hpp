#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "agral/tensor.hpp"

namespace agral {

enum class LayerKind { Conv3x3, Relu, Dropout, Conv1x1 };

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t channels = 0;  // conv layers only
};

// Fully-convolutional pixel classifier: 3x3 "same" convolutions with ReLU,
// one dropout layer immediately before the final 1x1 convolution that maps
// to the class logits, then a per-pixel softmax.
struct Architecture {
  std::size_t in_channels = 1;
  std::size_t class_count = 3;
  double default_dropout = 0.5;
  std::vector<LayerSpec> layers;

  // conv3x3 -> relu per hidden width, then dropout and the 1x1 classifier.
  static Architecture standard(std::size_t in_channels, std::size_t class_count,
                               std::vector<std::size_t> hidden = {8, 16},
                               double dropout_p = 0.5);

  // Throws ConfigError unless there is exactly one dropout layer and it sits
  // immediately before the final 1x1 convolution.
  void validate() const;

  std::string layer_string() const;
  static std::vector<LayerSpec> parse_layers(const std::string& text);
};

struct ConvWeights {
  std::size_t out_ch = 0;
  std::size_t in_ch = 0;
  std::size_t kernel = 0;
  // Stored as double for exact gradients, but every value is snapped to the
  // f32 grid so checkpoints round-trip bit-exactly.
  std::vector<double> w;  // (out, in, ky, kx)
  std::vector<double> b;  // (out)
};

struct SegModel {
  Architecture arch;
  std::vector<ConvWeights> convs;  // one entry per conv layer, in order
};

// Deterministic function of (arch, seed); weights from a fan-in-scaled
// uniform distribution, biases zero.
SegModel init_model(const Architecture& arch, std::uint64_t seed);

struct TrainConfig {
  std::size_t epochs = 30;
  double learning_rate = 0.05;
  std::size_t batch_size = 4;
  std::uint64_t weight_init_seed = 1;
  std::uint64_t shuffle_seed = 2;
};

struct Sample {
  Image image;
  ClassMask mask;
};

struct TrainResult {
  SegModel model;
  std::vector<double> epoch_loss;  // mean per-image pixel cross-entropy
};

// Plain mini-batch SGD on the mean pixel cross-entropy. Deterministic given
// (start, data, cfg); learning_rate 0 leaves the parameters bit-identical.
TrainResult train(const SegModel& start, std::span<const Sample> data,
                  const TrainConfig& cfg);

// Deterministic inference, dropout disabled. S = 1 stack.
ProbabilityStack predict(const SegModel& model, const Image& image);

// S stochastic forward passes with inverted dropout (retained activations
// scaled by 1/(1-p)); sample s uses the stream mix_seed(seed, s), so the
// result is independent of evaluation order.
ProbabilityStack mc_predict(const SegModel& model, const Image& image,
                            std::size_t samples, double dropout_p,
                            std::uint64_t seed);

struct LayerGrads {
  std::vector<double> w;
  std::vector<double> b;
};

// Mean pixel cross-entropy of one sample; when grads is non-null the
// gradients are accumulated into it (shapes must match the model).
double loss_and_gradients(const SegModel& model, const Sample& sample,
                          std::vector<LayerGrads>* grads);

std::vector<LayerGrads> zero_gradients(const SegModel& model);

// Checkpoint: one ALTS container per weight tensor plus a model.meta
// key=value file describing the architecture.
void save_checkpoint(const SegModel& model, const std::filesystem::path& dir);
SegModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace agral
