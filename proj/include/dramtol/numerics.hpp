// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dramtol {

enum class DtypeKind : std::uint8_t { int4 = 0, int8 = 1, int16 = 2, fp32 = 3 };

class Dtype {
 public:
  constexpr Dtype(DtypeKind kind = DtypeKind::fp32) : kind_(kind) {}

  constexpr DtypeKind kind() const { return kind_; }
  constexpr int bits() const {
    switch (kind_) {
      case DtypeKind::int4: return 4;
      case DtypeKind::int8: return 8;
      case DtypeKind::int16: return 16;
      case DtypeKind::fp32: return 32;
    }
    return 0;
  }
  constexpr bool is_integer() const { return kind_ != DtypeKind::fp32; }
  constexpr std::int32_t code_min() const { return -(1 << (bits() - 1)); }
  constexpr std::int32_t code_max() const { return (1 << (bits() - 1)) - 1; }
  constexpr std::uint8_t code() const { return static_cast<std::uint8_t>(kind_); }

  std::string_view name() const;
  static Dtype parse(std::string_view name);
  static Dtype from_code(std::uint8_t code);

  friend constexpr bool operator==(Dtype, Dtype) = default;

 private:
  DtypeKind kind_;
};

inline constexpr Dtype kInt4{DtypeKind::int4};
inline constexpr Dtype kInt8{DtypeKind::int8};
inline constexpr Dtype kInt16{DtypeKind::int16};
inline constexpr Dtype kFp32{DtypeKind::fp32};

/// Row-major typed array. fp32 tensors keep raw floats (bit patterns,
/// including NaN payloads, survive copies); integer tensors keep codes plus
/// a dequantization scale.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from_floats(std::vector<std::size_t> shape,
                            std::vector<float> values);
  static Tensor from_codes(Dtype dtype, std::vector<std::size_t> shape,
                           std::vector<std::int32_t> codes, double scale);

  Dtype dtype() const { return dtype_; }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const;
  double scale() const { return scale_; }

  std::span<const float> floats() const { return floats_; }
  std::span<float> floats() { return floats_; }
  std::span<const std::int32_t> codes() const { return codes_; }
  std::span<std::int32_t> codes() { return codes_; }

  /// Real value of element i (code * scale for integer tensors).
  double real(std::size_t i) const;

  /// Same dtype, shape, scale and bit patterns.
  bool bit_equal(const Tensor& other) const;

 private:
  Dtype dtype_ = kFp32;
  std::vector<std::size_t> shape_;
  std::vector<float> floats_;
  std::vector<std::int32_t> codes_;
  double scale_ = 1.0;
};

/// Dense bit array of `element_count` elements of `element_width` bits
/// each. Bit 0 of an element is its least significant bit; element i starts
/// at flat bit i * element_width.
class BitImage {
 public:
  BitImage() = default;
  BitImage(std::size_t element_width, std::size_t element_count);

  std::size_t element_width() const { return width_; }
  std::size_t element_count() const { return count_; }
  std::size_t size_bits() const { return width_ * count_; }

  bool test(std::size_t bit) const {
    return (words_[bit >> 6] >> (bit & 63)) & 1u;
  }
  void set(std::size_t bit, bool value) {
    const std::uint64_t mask = std::uint64_t{1} << (bit & 63);
    if (value) {
      words_[bit >> 6] |= mask;
    } else {
      words_[bit >> 6] &= ~mask;
    }
  }
  void flip(std::size_t bit) { words_[bit >> 6] ^= std::uint64_t{1} << (bit & 63); }

  std::uint64_t element(std::size_t i) const;
  void set_element(std::size_t i, std::uint64_t pattern);

  /// Number of set bits.
  std::size_t popcount() const;

  std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const BitImage&, const BitImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t count_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Symmetric linear quantization of an fp32 tensor into `target`.
/// scale = max|x| / (2^(b-1) - 1), codes = clamp(round_half_away(x / scale)).
Tensor quantize(const Tensor& t, Dtype target);

/// fp32 tensor of code * scale.
Tensor dequantize(const Tensor& t);

BitImage encode_bits(const Tensor& t);
Tensor decode_bits(const BitImage& img, Dtype dtype,
                   std::vector<std::size_t> shape, double scale = 1.0);

std::uint32_t float_bits(float f);
float bits_float(std::uint32_t u);

}  // namespace dramtol
