// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/rng.hpp"

#include <cmath>
#include <numbers>

namespace dramtol {

namespace {

__extension__ typedef unsigned __int128 u128;

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::array<std::uint32_t, 4> counter_of(std::uint64_t a, std::uint64_t b) {
  return {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
}

std::array<std::uint32_t, 2> key_of(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed),
          static_cast<std::uint32_t>(seed >> 32)};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t fnv1a64(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t CounterRng::bits(std::uint64_t a, std::uint64_t b) const {
  const auto out = philox4x32(counter_of(a, b), key_of(seed_));
  return static_cast<std::uint64_t>(out[0]) |
         (static_cast<std::uint64_t>(out[1]) << 32);
}

double CounterRng::normal(std::uint64_t a, std::uint64_t b) const {
  const auto out = philox4x32(counter_of(a, b), key_of(seed_));
  const std::uint64_t w0 = out[0] | (static_cast<std::uint64_t>(out[1]) << 32);
  const std::uint64_t w1 = out[2] | (static_cast<std::uint64_t>(out[3]) << 32);
  // u1 in (0, 1] so the log is finite.
  const double u1 = (static_cast<double>(w0 >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(w1 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  return CounterRng(seed).bits(fnv1a64(label), 0x5EEDull);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return CounterRng(seed).bits(index, 0x1DEull);
}

CounterRng CounterRng::split(std::string_view label) const {
  return CounterRng(derive_seed(seed_, label));
}

CounterRng CounterRng::split(std::uint64_t index) const {
  return CounterRng(derive_seed(seed_, index));
}

std::uint64_t StreamEngine::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Lemire 2019, "Fast random integer generation in an interval".
  u128 m = static_cast<u128>((*this)()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<u128>((*this)()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace dramtol
