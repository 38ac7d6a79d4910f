#include "agral/tensor.hpp"

#include <cmath>
#include <string>

#include "agral/errors.hpp"

namespace agral {

namespace {

std::size_t product(const std::vector<std::uint64_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

}  // namespace

Tensor Tensor::zeros_f32(std::vector<std::uint64_t> dims) {
  Tensor t;
  t.dtype = Dtype::F32;
  t.dims = std::move(dims);
  t.f32.assign(product(t.dims), 0.0f);
  return t;
}

Tensor Tensor::zeros_u8(std::vector<std::uint64_t> dims) {
  Tensor t;
  t.dtype = Dtype::U8;
  t.dims = std::move(dims);
  t.u8.assign(product(t.dims), 0);
  return t;
}

std::size_t Tensor::element_count() const { return product(dims); }

Tensor Image::to_tensor() const {
  Tensor t;
  t.dtype = Dtype::F32;
  t.dims = {channels, height, width};
  t.f32 = values;
  return t;
}

Image Image::from_tensor(const Tensor& t) {
  if (t.dtype != Dtype::F32) throw DataError("image tensor must be f32");
  Image img;
  if (t.dims.size() == 3) {
    img.channels = static_cast<std::size_t>(t.dims[0]);
    img.height = static_cast<std::size_t>(t.dims[1]);
    img.width = static_cast<std::size_t>(t.dims[2]);
  } else if (t.dims.size() == 2) {
    img.channels = 1;
    img.height = static_cast<std::size_t>(t.dims[0]);
    img.width = static_cast<std::size_t>(t.dims[1]);
  } else {
    throw DataError("image tensor must have rank 2 or 3, got rank " +
                    std::to_string(t.dims.size()));
  }
  img.values = t.f32;
  return img;
}

Tensor ClassMask::to_tensor() const {
  Tensor t;
  t.dtype = Dtype::U8;
  t.dims = {height, width};
  t.u8 = ids;
  return t;
}

ClassMask ClassMask::from_tensor(const Tensor& t) {
  if (t.dtype != Dtype::U8) throw DataError("mask tensor must be u8");
  if (t.dims.size() != 2) {
    throw DataError("mask tensor must have rank 2, got rank " +
                    std::to_string(t.dims.size()));
  }
  ClassMask m;
  m.height = static_cast<std::size_t>(t.dims[0]);
  m.width = static_cast<std::size_t>(t.dims[1]);
  m.ids = t.u8;
  return m;
}

Tensor ProbabilityStack::to_tensor() const {
  Tensor t;
  t.dtype = Dtype::F32;
  t.dims = {samples, classes, height, width};
  t.f32 = values;
  return t;
}

ProbabilityStack ProbabilityStack::from_tensor(const Tensor& t) {
  if (t.dtype != Dtype::F32) throw DataError("probability stack must be f32");
  if (t.dims.size() != 4) {
    throw DataError("probability stack must have rank 4, got rank " +
                    std::to_string(t.dims.size()));
  }
  ProbabilityStack s;
  s.samples = static_cast<std::size_t>(t.dims[0]);
  s.classes = static_cast<std::size_t>(t.dims[1]);
  s.height = static_cast<std::size_t>(t.dims[2]);
  s.width = static_cast<std::size_t>(t.dims[3]);
  s.values = t.f32;
  return s;
}

Tensor ScoreMap::to_tensor() const {
  Tensor t;
  t.dtype = Dtype::F32;
  t.dims = {height, width};
  t.f32 = values;
  return t;
}

StackValidation validate_stack(const ProbabilityStack& stack) {
  auto fail = [](std::string detail) {
    return StackValidation{false, std::move(detail)};
  };

  if (stack.samples < 1) return fail("S must be >= 1, got 0");
  if (stack.classes < 2)
    return fail("C must be >= 2, got " + std::to_string(stack.classes));
  if (stack.height < 1 || stack.width < 1) return fail("H and W must be >= 1");
  const std::size_t expected =
      stack.samples * stack.classes * stack.height * stack.width;
  if (stack.values.size() != expected) {
    return fail("value count " + std::to_string(stack.values.size()) +
                " does not match dims (expected " + std::to_string(expected) + ")");
  }

  for (std::size_t s = 0; s < stack.samples; ++s) {
    for (std::size_t h = 0; h < stack.height; ++h) {
      for (std::size_t w = 0; w < stack.width; ++w) {
        double sum = 0.0;
        for (std::size_t c = 0; c < stack.classes; ++c) {
          const float v = stack.at(s, c, h, w);
          if (!std::isfinite(v)) {
            return fail("non-finite value at (s=" + std::to_string(s) +
                        ",c=" + std::to_string(c) + ",h=" + std::to_string(h) +
                        ",w=" + std::to_string(w) + ")");
          }
          if (v < 0.0f || v > 1.0f) {
            return fail("value " + std::to_string(v) + " outside [0,1] at (s=" +
                        std::to_string(s) + ",c=" + std::to_string(c) +
                        ",h=" + std::to_string(h) + ",w=" + std::to_string(w) + ")");
          }
          sum += v;
        }
        if (std::fabs(sum - 1.0) > kStackNormTolerance) {
          return fail("pixel distribution sums to " + std::to_string(sum) +
                      " at (s=" + std::to_string(s) + ",h=" + std::to_string(h) +
                      ",w=" + std::to_string(w) + ")");
        }
      }
    }
  }
  return {};
}

}  // namespace agral
