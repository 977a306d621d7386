// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "dramtol/device_sim.hpp"
#include "dramtol/error.hpp"

using namespace dramtol;

namespace {

// Single-partition device whose cells are all weak, so a profile is a plain
// binomial sample of the partition BER.
GroundTruthDevice all_weak_device(double scale, ErrorModel hidden = UniformModel{1.0, 0.5}) {
  const auto ref = default_vendor_profile();
  const DramGeometry g{1, 64, 1024};
  std::vector<PartitionInfo> parts{{0, 0, 0, 64, g.cells_per_bank() / 8, scale}};
  return GroundTruthDevice(g, parts, ref.vdd_curve(), ref.trcd_curve(), {std::move(hidden)}, 3);
}

std::vector<OperatingPoint> lattice() {
  std::vector<OperatingPoint> ops;
  for (int v = 0; v <= 8; ++v) {
    for (int t = 0; t <= 14; ++t) ops.push_back({-v * 0.05, -t * 0.5});
  }
  return ops;
}

}  // namespace

TEST_CASE("anchor table of the default vendor profile") {
  const auto dev = default_vendor_profile();
  CHECK(dev.aggregate_ber({0, 0}) == 0.0);
  CHECK(dev.aggregate_ber({-0.35, -6.0}) == doctest::Approx(0.05));
  CHECK(dev.aggregate_ber({-0.30, 0.0}) == doctest::Approx(0.04));
  CHECK(dev.aggregate_ber({-0.10, 0.0}) == doctest::Approx(0.005));
  CHECK(dev.aggregate_ber({-0.25, 0.0}) == doctest::Approx(0.015));
  CHECK(dev.aggregate_ber({0.0, -1.0}) == doctest::Approx(0.005));
  CHECK(dev.aggregate_ber({0.0, -2.0}) == doctest::Approx(0.015));
  CHECK(dev.aggregate_ber({0.0, -4.5}) == doctest::Approx(0.03));
  CHECK(dev.aggregate_ber({0.0, -5.5}) == doctest::Approx(0.04));
  CHECK(dev.aggregate_ber({-0.05, -0.5}) == 0.0);
  CHECK(dev.aggregate_ber({-0.30, -1.0}) == doctest::Approx(0.04));
  // Midway between the -0.10 V and -0.25 V anchors.
  CHECK(dev.aggregate_ber({-0.175, 0.0}) == doctest::Approx(0.01));
}

TEST_CASE("operating point validation") {
  CHECK_NOTHROW((OperatingPoint{-0.1, -1.0}.validate()));
  CHECK_THROWS_AS((OperatingPoint{0.1, 0.0}.validate()), Error);
  CHECK_THROWS_AS((OperatingPoint{0.0, NAN}.validate()), Error);
}

TEST_CASE("partition curves") {
  const auto dev = default_vendor_profile();
  SUBCASE("nominal is error free everywhere") {
    for (const auto& p : dev.partitions()) CHECK(dev.ber_curve(p.id, {0, 0}) == 0.0);
  }
  SUBCASE("scale factor definition") {
    const auto half = all_weak_device(0.5);
    CHECK(half.ber_curve(0, {-0.30, 0.0}) == doctest::Approx(0.02));
  }
  SUBCASE("capacity-weighted average reproduces the aggregate") {
    for (const auto& op : lattice()) {
      double num = 0.0, den = 0.0;
      for (const auto& p : dev.partitions()) {
        num += dev.ber_curve(p.id, op) * p.capacity_bytes;
        den += p.capacity_bytes;
      }
      const double agg = dev.aggregate_ber(op);
      CHECK(std::abs(num / den - agg) <= 0.01 * agg + 1e-15);
    }
  }
  SUBCASE("monotone in both axes") {
    for (const auto& p : dev.partitions()) {
      for (int v = 0; v < 8; ++v) {
        for (int t = 0; t < 14; ++t) {
          const double here = dev.ber_curve(p.id, {-v * 0.05, -t * 0.5});
          CHECK(dev.ber_curve(p.id, {-(v + 1) * 0.05, -t * 0.5}) >= here);
          CHECK(dev.ber_curve(p.id, {-v * 0.05, -(t + 1) * 0.5}) >= here);
        }
      }
    }
  }
  SUBCASE("physical models carry the partition BER") {
    for (const auto& p : dev.partitions()) {
      const OperatingPoint op{-0.25, -2.0};
      CHECK(expected_ber(dev.model_at(p.id, op)) == doctest::Approx(dev.ber_curve(p.id, op)));
    }
    CHECK(dev.weak_map_seed(0) != dev.weak_map_seed(1));
  }
  SUBCASE("unknown partition") {
    CHECK_THROWS_AS(dev.ber_curve(9, {-0.1, 0}), Error);
  }
}

TEST_CASE("profiling") {
  SUBCASE("nominal point gives zero flips") {
    const auto t = profile_device(default_vendor_profile(), {0, 0}, 2, 1);
    CHECK(t.total_flips() == 0);
    CHECK(t.total_reads() == 2 * t.geometry.total_cells());
  }
  SUBCASE("flip rate within 3 sigma of the partition BER") {
    const auto dev = all_weak_device(1.0);
    const OperatingPoint op{-0.30, 0.0};
    const auto t = profile_device(dev, op, 100, 7);
    const double n = static_cast<double>(t.total_reads());
    const double p = dev.ber_curve(0, op);
    CHECK(p == doctest::Approx(0.04));
    CHECK(std::abs(static_cast<double>(t.total_flips()) - n * p) <=
          3.0 * std::sqrt(n * p * (1 - p)));
  }
  SUBCASE("default device tracks its aggregate curve") {
    const auto dev = default_vendor_profile();
    const OperatingPoint op{-0.30, 0.0};
    const auto t = profile_device(dev, op, 8, 7);
    const double rate = static_cast<double>(t.total_flips()) / t.total_reads();
    // Frozen weak maps add spread beyond read-level binomial noise.
    CHECK(rate == doctest::Approx(0.04).epsilon(0.03));
  }
  SUBCASE("inverted patterns read both values equally often") {
    for (auto pattern : {ProfilePattern::solid, ProfilePattern::checkered}) {
      for (std::uint32_t rounds : {2u, 4u}) {
        const auto t = profile_device(all_weak_device(1.0), {-0.1, 0}, rounds, 1, pattern);
        CHECK(t.zero_reads == t.one_reads);
        CHECK_NOTHROW(t.validate());
      }
    }
  }
  SUBCASE("data-dependent direction asymmetry") {
    const auto dev = all_weak_device(1.0, DataDependentModel{1.0, 0.05, 0.4});
    const auto t = profile_device(dev, {-0.25, 0.0}, 10, 1);
    CHECK(t.flips_one_to_zero() > 2 * t.flips_zero_to_one());
    const auto s = simulate_trace(DataDependentModel{0.1, 0.05, 0.2}, {1, 64, 1024}, 20, 1, 2);
    CHECK(s.flips_one_to_zero() > s.flips_zero_to_one());
  }
  SUBCASE("deterministic, sliceable and mergeable") {
    const auto dev = default_vendor_profile();
    const auto a = profile_device(dev, {-0.25, 0}, 2, 5);
    CHECK(a == profile_device(dev, {-0.25, 0}, 2, 5));
    const auto s = a.slice(1, 0, 256);
    CHECK(s.geometry == DramGeometry{1, 256, 2048});
    auto m = s;
    m.merge(s);
    CHECK(m.total_flips() == 2 * s.total_flips());
    CHECK(m.rounds == 4);
    CHECK_THROWS_AS(m.merge(a), Error);
  }
}
