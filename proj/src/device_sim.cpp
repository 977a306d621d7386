// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/device_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dramtol/error.hpp"
#include "dramtol/rng.hpp"

namespace dramtol {

void OperatingPoint::validate() const {
  if (!(delta_vdd <= 0.0) || !(delta_trcd <= 0.0)) {
    throw Error("bad_operating_point",
                "operating point reductions must be <= 0");
  }
}

double AnchorCurve::eval(double reduction) const {
  reduction = std::fabs(reduction);
  if (anchors.empty() || reduction <= knee) return 0.0;
  double x0 = knee, y0 = 0.0;
  for (const auto& [x1, y1] : anchors) {
    if (reduction <= x1) {
      if (x1 <= x0) return y1;
      return y0 + (y1 - y0) * (reduction - x0) / (x1 - x0);
    }
    x0 = x1;
    y0 = y1;
  }
  return anchors.back().second;
}

GroundTruthDevice::GroundTruthDevice(DramGeometry geometry,
                                     std::vector<PartitionInfo> partitions,
                                     AnchorCurve vdd_curve, AnchorCurve trcd_curve,
                                     std::vector<ErrorModel> hidden_reference,
                                     std::uint64_t seed)
    : geometry_(geometry),
      partitions_(std::move(partitions)),
      vdd_curve_(std::move(vdd_curve)),
      trcd_curve_(std::move(trcd_curve)),
      hidden_(std::move(hidden_reference)),
      seed_(seed) {
  geometry_.validate();
  if (hidden_.size() != partitions_.size()) {
    throw Error("bad_device", "one hidden model per partition is required");
  }
  for (std::size_t i = 0; i < partitions_.size(); ++i) {
    const auto& p = partitions_[i];
    if (p.id != i) throw Error("bad_device", "partition ids must be 0..n-1");
    if (p.bank >= geometry_.banks || p.row_begin >= p.row_end ||
        p.row_end > geometry_.rows_per_bank || p.capacity_bytes == 0) {
      throw Error("bad_device", "partition " + std::to_string(i) + " is malformed");
    }
    validate_model(hidden_[i], geometry_);
    if (expected_ber(hidden_[i]) <= 0.0) {
      throw Error("bad_device", "hidden model of partition " + std::to_string(i) +
                                    " has zero BER at the reference point");
    }
  }
}

const PartitionInfo& GroundTruthDevice::partition(PartitionId id) const {
  if (id >= partitions_.size()) {
    throw Error("unknown_partition", "unknown partition " + std::to_string(id));
  }
  return partitions_[id];
}

double GroundTruthDevice::aggregate_ber(const OperatingPoint& op) const {
  return std::max(vdd_curve_.eval(op.delta_vdd), trcd_curve_.eval(op.delta_trcd));
}

double GroundTruthDevice::ber_curve(PartitionId id, const OperatingPoint& op) const {
  return std::min(1.0, aggregate_ber(op) * partition(id).ber_scale);
}

ErrorModel GroundTruthDevice::model_at(PartitionId id, const OperatingPoint& op) const {
  return scale_to_ber(hidden_[partition(id).id], ber_curve(id, op));
}

std::uint64_t GroundTruthDevice::weak_map_seed(PartitionId id) const {
  return derive_seed(derive_seed(seed_, "weak-map"), static_cast<std::uint64_t>(partition(id).id));
}

GroundTruthDevice default_vendor_profile(std::uint64_t seed) {
  const DramGeometry geom{4, 256, 2048};

  AnchorCurve vdd{0.05, {{0.10, 0.005}, {0.25, 0.015}, {0.30, 0.040}, {0.35, 0.050}}};
  AnchorCurve trcd{0.5,
                   {{1.0, 0.005}, {2.0, 0.015}, {4.5, 0.030}, {5.5, 0.040}, {6.0, 0.050}}};

  const double raw_scales[4] = {0.25, 0.5, 1.0, 2.0};
  const std::uint64_t capacity = geom.cells_per_bank() / 8;
  // Equal capacities, so the capacity-weighted mean is the plain mean.
  const double mean = (raw_scales[0] + raw_scales[1] + raw_scales[2] + raw_scales[3]) / 4.0;
  std::vector<PartitionInfo> parts;
  for (std::uint32_t b = 0; b < 4; ++b) {
    parts.push_back({b, b, 0, geom.rows_per_bank, capacity, raw_scales[b] / mean});
  }

  StreamEngine rng(derive_seed(seed, "hidden-models"));
  BitlineModel bitline;
  for (std::uint32_t i = 0; i < geom.bits_per_row; ++i) {
    bitline.weak_fraction.push_back(0.01 + 0.02 * rng.uniform());
    bitline.flip_probability.push_back(0.2 + 0.6 * rng.uniform());
  }
  WordlineModel wordline;
  for (std::uint32_t i = 0; i < geom.rows_per_bank; ++i) {
    wordline.weak_fraction.push_back(0.01 + 0.02 * rng.uniform());
    wordline.flip_probability.push_back(0.2 + 0.6 * rng.uniform());
  }
  std::vector<ErrorModel> hidden{
      UniformModel{0.02, 0.5},
      DataDependentModel{0.02, 0.1, 0.4},
      std::move(bitline),
      std::move(wordline),
  };
  return GroundTruthDevice(geom, std::move(parts), std::move(vdd), std::move(trcd),
                           std::move(hidden), seed);
}

std::uint64_t ErrorTrace::total_reads() const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < cells(); ++i) n += zero_reads[i] + one_reads[i];
  return n;
}

std::uint64_t ErrorTrace::flips_zero_to_one() const {
  return std::accumulate(zero_flips.begin(), zero_flips.end(), std::uint64_t{0});
}

std::uint64_t ErrorTrace::flips_one_to_zero() const {
  return std::accumulate(one_flips.begin(), one_flips.end(), std::uint64_t{0});
}

std::uint64_t ErrorTrace::total_flips() const {
  return flips_zero_to_one() + flips_one_to_zero();
}

void ErrorTrace::validate() const {
  geometry.validate();
  const auto n = geometry.total_cells();
  if (zero_reads.size() != n || one_reads.size() != n || zero_flips.size() != n ||
      one_flips.size() != n) {
    throw Error("bad_trace", "trace arrays do not match the geometry");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (zero_flips[i] > zero_reads[i] || one_flips[i] > one_reads[i]) {
      throw Error("bad_trace", "cell " + std::to_string(i) + " has more flips than reads");
    }
  }
}

ErrorTrace ErrorTrace::slice(std::uint32_t bank, std::uint32_t row_begin,
                             std::uint32_t row_end) const {
  if (bank >= geometry.banks || row_begin >= row_end || row_end > geometry.rows_per_bank) {
    throw Error("bad_trace", "slice outside the trace geometry");
  }
  ErrorTrace out;
  out.geometry = {1, row_end - row_begin, geometry.bits_per_row};
  out.op = op;
  out.rounds = rounds;
  const auto begin = geometry.linear({bank, row_begin, 0});
  const auto end = geometry.linear({bank, row_end - 1, 0}) + geometry.bits_per_row;
  auto cut = [&](const std::vector<std::uint16_t>& v) {
    return std::vector<std::uint16_t>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                                      v.begin() + static_cast<std::ptrdiff_t>(end));
  };
  out.zero_reads = cut(zero_reads);
  out.one_reads = cut(one_reads);
  out.zero_flips = cut(zero_flips);
  out.one_flips = cut(one_flips);
  return out;
}

void ErrorTrace::merge(const ErrorTrace& other) {
  if (!(geometry == other.geometry)) {
    throw Error("bad_trace", "cannot merge traces of different geometry");
  }
  auto add = [](std::vector<std::uint16_t>& a, const std::vector<std::uint16_t>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const unsigned s = unsigned{a[i]} + b[i];
      if (s > std::numeric_limits<std::uint16_t>::max()) {
        throw Error("bad_trace", "merged counts overflow 16 bits");
      }
      a[i] = static_cast<std::uint16_t>(s);
    }
  };
  add(zero_reads, other.zero_reads);
  add(one_reads, other.one_reads);
  add(zero_flips, other.zero_flips);
  add(one_flips, other.one_flips);
  rounds += other.rounds;
}

namespace {

// Value stored in a cell during round 0; every later round inverts it.
inline bool base_pattern(std::uint32_t row, std::uint32_t bit, ProfilePattern pattern) {
  const bool even_row_value = pattern == ProfilePattern::solid ? true : (bit % 2 == 0);
  return (row % 2 == 0) ? even_row_value : !even_row_value;
}

void simulate_region(const ErrorModel& model, const DramGeometry& geom,
                     CellRange range, std::uint32_t rounds, std::uint64_t map_seed,
                     std::uint64_t access_seed, ProfilePattern pattern, ErrorTrace& out) {
  const std::uint16_t ones_if_base = static_cast<std::uint16_t>((rounds + 1) / 2);
  const std::uint16_t ones_if_not = static_cast<std::uint16_t>(rounds / 2);
  for (std::uint64_t i = range.begin; i < range.end; ++i) {
    const auto a = geom.address(i);
    const bool base = base_pattern(a.row, a.bit, pattern);
    out.one_reads[i] = base ? ones_if_base : ones_if_not;
    out.zero_reads[i] = static_cast<std::uint16_t>(rounds - out.one_reads[i]);
  }
  const auto map = WeakCellMap::generate(model, geom, map_seed,
                                         std::span<const CellRange>(&range, 1));
  std::vector<CounterRng> access;
  access.reserve(rounds);
  for (std::uint32_t r = 0; r < rounds; ++r) access.emplace_back(derive_seed(access_seed, r));
  for (std::uint64_t cell : map.cells()) {
    const auto a = geom.address(cell);
    const bool base = base_pattern(a.row, a.bit, pattern);
    const double f_base = flip_probability(model, a, base);
    const double f_inv = flip_probability(model, a, !base);
    for (std::uint32_t r = 0; r < rounds; ++r) {
      const bool stored = (r % 2 == 0) ? base : !base;
      const double f = (r % 2 == 0) ? f_base : f_inv;
      if (f > 0.0 && access[r].uniform(cell) < f) {
        if (stored) {
          ++out.one_flips[cell];
        } else {
          ++out.zero_flips[cell];
        }
      }
    }
  }
}

ErrorTrace empty_trace(const DramGeometry& geom, std::uint32_t rounds) {
  if (rounds == 0) throw Error("bad_rounds", "profiling needs at least one round");
  if (rounds > std::numeric_limits<std::uint16_t>::max()) {
    throw Error("bad_rounds", "at most 65535 rounds fit the trace counters");
  }
  ErrorTrace t;
  t.geometry = geom;
  t.rounds = rounds;
  const auto n = geom.total_cells();
  t.zero_reads.assign(n, 0);
  t.one_reads.assign(n, 0);
  t.zero_flips.assign(n, 0);
  t.one_flips.assign(n, 0);
  return t;
}

}  // namespace

ErrorTrace simulate_trace(const ErrorModel& model, const DramGeometry& geom,
                          std::uint32_t rounds, std::uint64_t map_seed,
                          std::uint64_t access_seed, ProfilePattern pattern) {
  validate_model(model, geom);
  ErrorTrace t = empty_trace(geom, rounds);
  simulate_region(model, geom, {0, geom.total_cells()}, rounds, map_seed, access_seed,
                  pattern, t);
  return t;
}

ErrorTrace profile_device(const GroundTruthDevice& dev, const OperatingPoint& op,
                          std::uint32_t rounds, std::uint64_t seed,
                          ProfilePattern pattern) {
  op.validate();
  const auto& geom = dev.geometry();
  ErrorTrace t = empty_trace(geom, rounds);
  t.op = op;
  // Cells outside every partition are read but sit in reliable memory.
  simulate_region(UniformModel{0.0, 0.0}, geom, {0, geom.total_cells()}, rounds, 0, 0,
                  pattern, t);
  for (const auto& p : dev.partitions()) {
    const CellRange range{geom.linear({p.bank, p.row_begin, 0}),
                          geom.linear({p.bank, p.row_end - 1, 0}) + geom.bits_per_row};
    simulate_region(dev.model_at(p.id, op), geom, range, rounds, dev.weak_map_seed(p.id),
                    derive_seed(seed, static_cast<std::uint64_t>(p.id)), pattern, t);
  }
  return t;
}

}  // namespace dramtol
