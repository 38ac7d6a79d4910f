#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace agral {

enum class Dtype : std::uint8_t { F32 = 1, U8 = 2 };

// Dense row-major tensor of rank <= 4, the in-memory form of an ALTS
// container. Exactly one of f32/u8 is populated depending on dtype.
struct Tensor {
  Dtype dtype = Dtype::F32;
  std::vector<std::uint64_t> dims;
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;

  static Tensor zeros_f32(std::vector<std::uint64_t> dims);
  static Tensor zeros_u8(std::vector<std::uint64_t> dims);

  std::size_t element_count() const;

  bool operator==(const Tensor&) const = default;
};

// Single image, channels x height x width, values expected in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;  // row-major (c, h, w)

  float at(std::size_t c, std::size_t h, std::size_t w) const {
    return values[(c * height + h) * width + w];
  }
  float& at(std::size_t c, std::size_t h, std::size_t w) {
    return values[(c * height + h) * width + w];
  }

  Tensor to_tensor() const;
  static Image from_tensor(const Tensor& t);
};

// Per-pixel class IDs; 0 = background, 1 = crop, 2 = weed in this project.
struct ClassMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> ids;  // row-major (h, w)

  std::uint8_t at(std::size_t h, std::size_t w) const { return ids[h * width + w]; }
  std::uint8_t& at(std::size_t h, std::size_t w) { return ids[h * width + w]; }

  Tensor to_tensor() const;
  static ClassMask from_tensor(const Tensor& t);
};

// S Monte-Carlo softmax outputs over C classes for one H x W image.
// Layout is row-major (s, c, h, w).
struct ProbabilityStack {
  std::size_t samples = 0;
  std::size_t classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  float at(std::size_t s, std::size_t c, std::size_t h, std::size_t w) const {
    return values[((s * classes + c) * height + h) * width + w];
  }
  float& at(std::size_t s, std::size_t c, std::size_t h, std::size_t w) {
    return values[((s * classes + c) * height + h) * width + w];
  }
  std::size_t pixel_count() const { return height * width; }

  Tensor to_tensor() const;
  static ProbabilityStack from_tensor(const Tensor& t);
};

// Per-pixel uncertainty in nats, clamped non-negative on read-out.
struct ScoreMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  float at(std::size_t h, std::size_t w) const { return values[h * width + w]; }
  float& at(std::size_t h, std::size_t w) { return values[h * width + w]; }

  Tensor to_tensor() const;
};

// How closely each pixel distribution must sum to 1 (absorbs f32 softmax
// rounding).
inline constexpr double kStackNormTolerance = 1e-5;

struct StackValidation {
  bool ok = true;
  std::string detail;  // names the first offending index and value
};

// Checks the ProbabilityStack invariants: positive dims, finite values in
// [0, 1], per-pixel normalization within kStackNormTolerance.
StackValidation validate_stack(const ProbabilityStack& stack);

}  // namespace agral
