// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/numerics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "dramtol/error.hpp"

namespace dramtol {

std::string_view Dtype::name() const {
  switch (kind_) {
    case DtypeKind::int4: return "int4";
    case DtypeKind::int8: return "int8";
    case DtypeKind::int16: return "int16";
    case DtypeKind::fp32: return "fp32";
  }
  return "?";
}

Dtype Dtype::parse(std::string_view name) {
  if (name == "int4") return kInt4;
  if (name == "int8") return kInt8;
  if (name == "int16") return kInt16;
  if (name == "fp32") return kFp32;
  throw Error("bad_dtype", "unknown dtype '" + std::string(name) + "'");
}

Dtype Dtype::from_code(std::uint8_t code) {
  if (code > 3) {
    throw Error("bad_dtype", "unknown dtype code " + std::to_string(code));
  }
  return Dtype(static_cast<DtypeKind>(code));
}

std::uint32_t float_bits(float f) { return std::bit_cast<std::uint32_t>(f); }
float bits_float(std::uint32_t u) { return std::bit_cast<float>(u); }

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void check_shape(const std::vector<std::size_t>& shape, std::size_t n) {
  for (auto d : shape) {
    if (d == 0) throw Error("bad_shape", "tensor dimensions must be positive");
  }
  if (product(shape) != n) {
    throw Error("bad_shape", "element count " + std::to_string(n) +
                                 " does not match shape product " +
                                 std::to_string(product(shape)));
  }
}

}  // namespace

Tensor Tensor::from_floats(std::vector<std::size_t> shape,
                           std::vector<float> values) {
  check_shape(shape, values.size());
  Tensor t;
  t.dtype_ = kFp32;
  t.shape_ = std::move(shape);
  t.floats_ = std::move(values);
  t.scale_ = 1.0;
  return t;
}

Tensor Tensor::from_codes(Dtype dtype, std::vector<std::size_t> shape,
                          std::vector<std::int32_t> codes, double scale) {
  if (!dtype.is_integer()) {
    throw Error("bad_dtype", "from_codes requires an integer dtype");
  }
  check_shape(shape, codes.size());
  for (auto c : codes) {
    if (c < dtype.code_min() || c > dtype.code_max()) {
      throw Error("code_range", "code " + std::to_string(c) + " outside " +
                                    std::string(dtype.name()) + " range");
    }
  }
  Tensor t;
  t.dtype_ = dtype;
  t.shape_ = std::move(shape);
  t.codes_ = std::move(codes);
  t.scale_ = scale;
  return t;
}

std::size_t Tensor::size() const {
  return dtype_.is_integer() ? codes_.size() : floats_.size();
}

double Tensor::real(std::size_t i) const {
  return dtype_.is_integer() ? codes_[i] * scale_
                             : static_cast<double>(floats_[i]);
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (dtype_ != other.dtype_ || shape_ != other.shape_) return false;
  if (std::bit_cast<std::uint64_t>(scale_) !=
      std::bit_cast<std::uint64_t>(other.scale_)) {
    return false;
  }
  if (dtype_.is_integer()) return codes_ == other.codes_;
  return floats_.size() == other.floats_.size() &&
         std::memcmp(floats_.data(), other.floats_.data(),
                     floats_.size() * sizeof(float)) == 0;
}

BitImage::BitImage(std::size_t element_width, std::size_t element_count)
    : width_(element_width),
      count_(element_count),
      words_((element_width * element_count + 63) / 64, 0) {}

std::uint64_t BitImage::element(std::size_t i) const {
  std::uint64_t v = 0;
  const std::size_t base = i * width_;
  // Elements are at most 32 bits wide, so they span at most two words.
  const std::size_t w = base >> 6, off = base & 63;
  v = words_[w] >> off;
  if (off + width_ > 64) v |= words_[w + 1] << (64 - off);
  return width_ == 64 ? v : (v & ((std::uint64_t{1} << width_) - 1));
}

void BitImage::set_element(std::size_t i, std::uint64_t pattern) {
  const std::size_t base = i * width_;
  const std::uint64_t mask =
      width_ == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width_) - 1);
  pattern &= mask;
  const std::size_t w = base >> 6, off = base & 63;
  words_[w] = (words_[w] & ~(mask << off)) | (pattern << off);
  if (off + width_ > 64) {
    const std::size_t spill = 64 - off;
    words_[w + 1] = (words_[w + 1] & ~(mask >> spill)) | (pattern >> spill);
  }
}

std::size_t BitImage::popcount() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

Tensor quantize(const Tensor& t, Dtype target) {
  if (!target.is_integer()) {
    throw Error("bad_dtype", "quantize target must be an integer dtype");
  }
  if (t.dtype() != kFp32) {
    throw Error("bad_dtype", "quantize input must be fp32");
  }
  double max_abs = 0.0;
  for (float v : t.floats()) {
    if (!std::isfinite(v)) {
      throw Error("non_finite", "quantize input contains NaN or Inf");
    }
    max_abs = std::max(max_abs, std::fabs(static_cast<double>(v)));
  }
  const double qmax = target.code_max();
  const double scale = max_abs == 0.0 ? 1.0 : max_abs / qmax;
  std::vector<std::int32_t> codes(t.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    // std::round rounds half away from zero.
    const double q = std::round(static_cast<double>(t.floats()[i]) / scale);
    codes[i] = static_cast<std::int32_t>(
        std::clamp(q, static_cast<double>(target.code_min()), qmax));
  }
  return Tensor::from_codes(target, t.shape(), std::move(codes), scale);
}

Tensor dequantize(const Tensor& t) {
  if (!t.dtype().is_integer()) {
    throw Error("bad_dtype", "dequantize input must be an integer dtype");
  }
  std::vector<float> out(t.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(t.codes()[i] * t.scale());
  }
  return Tensor::from_floats(t.shape(), std::move(out));
}

BitImage encode_bits(const Tensor& t) {
  const auto width = static_cast<std::size_t>(t.dtype().bits());
  BitImage img(width, t.size());
  if (t.dtype().is_integer()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      // Two's complement truncated to the element width.
      img.set_element(i, static_cast<std::uint32_t>(t.codes()[i]));
    }
  } else {
    for (std::size_t i = 0; i < t.size(); ++i) {
      img.set_element(i, float_bits(t.floats()[i]));
    }
  }
  return img;
}

Tensor decode_bits(const BitImage& img, Dtype dtype,
                   std::vector<std::size_t> shape, double scale) {
  if (img.element_width() != static_cast<std::size_t>(dtype.bits())) {
    throw Error("size_mismatch", "bit image element width " +
                                     std::to_string(img.element_width()) +
                                     " does not match " +
                                     std::string(dtype.name()));
  }
  if (product(shape) != img.element_count()) {
    throw Error("size_mismatch",
                "bit image element count does not match shape");
  }
  if (!dtype.is_integer()) {
    std::vector<float> values(img.element_count());
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = bits_float(static_cast<std::uint32_t>(img.element(i)));
    }
    return Tensor::from_floats(std::move(shape), std::move(values));
  }
  const int b = dtype.bits();
  std::vector<std::int32_t> codes(img.element_count());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto raw = static_cast<std::uint32_t>(img.element(i));
    // Sign-extend from bit b-1.
    const std::uint32_t sign = 1u << (b - 1);
    codes[i] = static_cast<std::int32_t>((raw ^ sign) - sign);
  }
  return Tensor::from_codes(dtype, std::move(shape), std::move(codes), scale);
}

}  // namespace dramtol
