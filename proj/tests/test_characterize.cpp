// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "dramtol/characterize.hpp"
#include "dramtol/error.hpp"

using namespace dramtol;

namespace {

AccuracyStats stats(double mean) {
  AccuracyStats s;
  s.mean = mean;
  s.trials = 1;
  s.per_trial = {mean};
  return s;
}

// Accuracy 90 up to theta, collapse to 10 above it.
AccuracyProbe step_probe(double theta, std::size_t* calls = nullptr) {
  return [theta, calls](const ProbeRequest& r) {
    if (calls) ++*calls;
    return stats(r.ber <= theta ? 90.0 : 10.0);
  };
}

// Each data type tolerates its own BER; accuracy collapses when any type
// exceeds its limit.
AccuracyProbe per_type_probe(std::map<DataTypeId, double> limit) {
  return [limit](const ProbeRequest& r) {
    for (const auto& [id, lim] : limit) {
      const auto it = r.per_type.find(id);
      const double b = it == r.per_type.end() ? r.ber : it->second;
      if (b > lim * (1 + 1e-12)) return stats(10.0);
    }
    return stats(90.0);
  };
}

const DataTypeId kW0{DataTypeId::Kind::weight, 0};
const DataTypeId kW1{DataTypeId::Kind::weight, 1};
const DataTypeId kI0{DataTypeId::Kind::ifm, 0};

}  // namespace

TEST_CASE("grids") {
  const auto g = default_ber_grid();
  CHECK(g.size() == 61);
  CHECK(g.front() == doctest::Approx(1e-8));
  CHECK(g.back() == 0.3);
  CHECK(g[8] == doctest::Approx(1e-7));
  CHECK(parse_grid("default") == g);
  const auto r = parse_grid("1e-4:1e-2:2");
  REQUIRE(r.size() == 5);
  CHECK(r[1] == doctest::Approx(std::sqrt(10.0) * 1e-4));
  CHECK(r[4] == doctest::Approx(1e-2));
  CHECK(parse_grid("0.001,0.01,0.1") == std::vector<double>{0.001, 0.01, 0.1});
  CHECK_THROWS_AS(parse_grid("0.1,0.01"), Error);
  CHECK_THROWS_AS(parse_grid("a,b"), Error);
  CHECK_THROWS_AS(parse_grid("1e-4:1e-2"), Error);
  CHECK_THROWS_AS(parse_grid("0.7"), Error);
}

TEST_CASE("coarse search on a step oracle") {
  const auto g = default_ber_grid();
  const int budget = static_cast<int>(std::ceil(std::log2(static_cast<double>(g.size()))));
  for (std::size_t i = 0; i < g.size(); ++i) {
    CAPTURE(i);
    std::size_t calls = 0;
    CoarseOptions o;
    const auto r = coarse_characterize(step_probe(g[i], &calls), 90.0, g, o);
    CHECK(r.ber == g[i]);
    CHECK(r.grid_index == static_cast<int>(i));
    CHECK(r.search_probes <= static_cast<std::size_t>(budget));
    CHECK(calls == r.search_probes + r.validation_probes);
    CHECK(calls <= static_cast<std::size_t>(budget + 1));
    CHECK(r.warnings.empty());
  }
}

TEST_CASE("coarse search edge cases") {
  const auto g = default_ber_grid();
  CoarseOptions o;
  SUBCASE("target of 100 points passes everything") {
    o.target_drop = 100.0;
    CHECK(coarse_characterize(step_probe(0.0), 90.0, g, o).ber == g.back());
  }
  SUBCASE("single passing point") {
    const std::vector<double> one = {1e-3};
    const auto r = coarse_characterize(step_probe(1.0), 90.0, one, o);
    CHECK(r.ber == 1e-3);
    CHECK(r.grid_index == 0);
  }
  SUBCASE("nothing passes") {
    const auto r = coarse_characterize(step_probe(1e-12), 90.0, g, o);
    CHECK(r.ber == 0.0);
    CHECK(r.grid_index == -1);
    CHECK_FALSE(r.warnings.empty());
  }
  SUBCASE("failed validation steps down with a warning") {
    // Passes the 10-trial search up to 1e-3, but 30-trial probes only to 1e-4.
    const AccuracyProbe p = [](const ProbeRequest& r) {
      const double theta = r.trials > 10 ? 1e-4 : 1e-3;
      return stats(r.ber <= theta * (1 + 1e-9) ? 90.0 : 10.0);
    };
    const auto r = coarse_characterize(p, 90.0, g, o);
    CHECK(r.ber == doctest::Approx(1e-4));
    CHECK_FALSE(r.warnings.empty());
  }
  SUBCASE("deterministic") {
    const auto a = coarse_characterize(step_probe(g[30]), 90.0, g, o);
    const auto b = coarse_characterize(step_probe(g[30]), 90.0, g, o);
    CHECK(a.ber == b.ber);
    CHECK(a.log.size() == b.log.size());
  }
}

TEST_CASE("fine sweep") {
  FineOptions o;
  SUBCASE("one data type reproduces the multiplicative ladder") {
    const double theta = 3.7e-3;
    const std::vector<DataTypeId> types = {kW0};
    const auto r = fine_characterize(per_type_probe({{kW0, theta}}), 90.0, types, 1e-4, o);
    double want = 1e-4;
    while (want * 1.5 <= theta) want *= 1.5;
    CHECK(r.per_type.at(kW0) == doctest::Approx(want));
  }
  SUBCASE("an oversized increment keeps the bootstrap") {
    o.increment = 1e6;
    const std::vector<DataTypeId> types = {kW0, kW1, kI0};
    const auto r = fine_characterize(
        per_type_probe({{kW0, 1e-2}, {kW1, 1e-2}, {kI0, 1e-2}}), 90.0, types, 1e-3, o);
    for (const auto& t : types) CHECK(r.per_type.at(t) == 1e-3);
    // Raises past the BER cap are not probed.
    CHECK(r.probes == 0);
  }
  SUBCASE("per-type results dominate the bootstrap") {
    const std::vector<DataTypeId> types = {kW0, kW1, kI0};
    const auto r = fine_characterize(
        per_type_probe({{kW0, 1e-3}, {kW1, 5e-2}, {kI0, 2e-2}}), 90.0, types, 1e-3, o);
    for (const auto& t : types) CHECK(r.per_type.at(t) >= 1e-3);
    CHECK(r.per_type.at(kW0) == 1e-3);
    CHECK(r.per_type.at(kW1) >= 1.5e-3);
    CHECK(r.per_type.at(kW1) * 1.5 > 5e-2);
    CHECK(r.per_type.at(kI0) * 1.5 > 2e-2);
  }
  SUBCASE("zero bootstrap starts at the floor") {
    const std::vector<DataTypeId> types = {kW0};
    const auto r = fine_characterize(per_type_probe({{kW0, 1e-6}}), 90.0, types, 0.0, o);
    CHECK(r.per_type.at(kW0) >= 1e-8);
    CHECK(r.per_type.at(kW0) <= 1e-6);
  }
  SUBCASE("bad increment") {
    o.increment = 1.0;
    const std::vector<DataTypeId> types = {kW0};
    CHECK_THROWS_AS(fine_characterize(step_probe(1), 90.0, types, 1e-3, o), Error);
  }
}
