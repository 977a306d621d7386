// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace dramtol {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Pure: the output depends only on counter and key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// FNV-1a over the bytes of a label.
std::uint64_t fnv1a64(std::string_view label);

/// Counter-based generator. A `CounterRng` is a key; draws are addressed by
/// a 128-bit counter made of two 64-bit words, so any cell/access pair can
/// be sampled independently of evaluation order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::uint64_t a, std::uint64_t b = 0) const;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t a, std::uint64_t b = 0) const {
    return static_cast<double>(bits(a, b) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on two addressed uniforms.
  double normal(std::uint64_t a, std::uint64_t b = 0) const;

  /// Child key for a named stage. The label is hashed with FNV-1a and the
  /// hash is run through Philox under the parent key.
  CounterRng split(std::string_view label) const;
  CounterRng split(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
};

/// Documented key derivation used to fan a global seed out to stages:
/// `derive_seed(s, name) == Philox(key=s, counter={fnv1a64(name), 0x5EED})`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Sequential adapter over a CounterRng stream; models
/// std::uniform_random_bit_generator.
class StreamEngine {
 public:
  using result_type = std::uint64_t;

  explicit StreamEngine(std::uint64_t seed) : rng_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return rng_.bits(counter_++, 0); }

  double uniform() { return rng_.uniform(counter_++, 1); }
  double normal() { return rng_.normal(counter_++, 2); }

  /// Uniform integer in [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n);

 private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace dramtol
