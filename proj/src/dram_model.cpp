// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/dram_model.hpp"

#include <algorithm>
#include <numeric>

#include "dramtol/error.hpp"
#include "dramtol/rng.hpp"

namespace dramtol {

void DramGeometry::validate() const {
  if (banks == 0 || rows_per_bank == 0 || bits_per_row == 0) {
    throw Error("bad_geometry", "geometry counts must all be >= 1");
  }
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error("bad_model", std::string(what) + " = " + std::to_string(p) +
                                 " is not a probability");
  }
}

void check_lines(const std::vector<double>& weak,
                 const std::vector<double>& flip, std::size_t expected,
                 const char* what) {
  if (weak.size() != expected || flip.size() != expected) {
    throw Error("bad_model", std::string(what) + " arrays have length " +
                                 std::to_string(weak.size()) + "/" +
                                 std::to_string(flip.size()) + ", expected " +
                                 std::to_string(expected));
  }
  for (double p : weak) check_probability(p, what);
  for (double p : flip) check_probability(p, what);
}

double mean_product(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s / static_cast<double>(a.size());
}

// Per-cell probabilities without variant dispatch in the inner loops.
struct CellModel {
  int family = 0;
  double weak = 0.0, flip = 0.0, flip_zero = 0.0, flip_one = 0.0;
  const std::vector<double>* line_weak = nullptr;
  const std::vector<double>* line_flip = nullptr;

  explicit CellModel(const ErrorModel& m) : family(family_of(m)) {
    std::visit(overloaded{
                   [&](const UniformModel& u) {
                     weak = u.weak_fraction;
                     flip = u.flip_probability;
                   },
                   [&](const BitlineModel& b) {
                     line_weak = &b.weak_fraction;
                     line_flip = &b.flip_probability;
                   },
                   [&](const WordlineModel& w) {
                     line_weak = &w.weak_fraction;
                     line_flip = &w.flip_probability;
                   },
                   [&](const DataDependentModel& d) {
                     weak = d.weak_fraction;
                     flip_zero = d.flip_probability_zero;
                     flip_one = d.flip_probability_one;
                   }},
               m);
  }

  double weak_at(const CellAddress& c) const {
    switch (family) {
      case 1: return (*line_weak)[c.bit];
      case 2: return (*line_weak)[c.row];
      default: return weak;
    }
  }
  double flip_at(const CellAddress& c, bool stored_one) const {
    switch (family) {
      case 0: return flip;
      case 1: return (*line_flip)[c.bit];
      case 2: return (*line_flip)[c.row];
      default: return stored_one ? flip_one : flip_zero;
    }
  }
};

}  // namespace

void validate_model(const ErrorModel& model, const DramGeometry& geom) {
  geom.validate();
  std::visit(overloaded{
                 [](const UniformModel& u) {
                   check_probability(u.weak_fraction, "P");
                   check_probability(u.flip_probability, "F_A");
                 },
                 [&](const BitlineModel& b) {
                   check_lines(b.weak_fraction, b.flip_probability,
                               geom.bits_per_row, "P_B/F_B");
                 },
                 [&](const WordlineModel& w) {
                   check_lines(w.weak_fraction, w.flip_probability,
                               geom.rows_per_bank, "P_W/F_W");
                 },
                 [](const DataDependentModel& d) {
                   check_probability(d.weak_fraction, "P");
                   check_probability(d.flip_probability_zero, "F_V0");
                   check_probability(d.flip_probability_one, "F_V1");
                 }},
             model);
}

double weak_probability(const ErrorModel& model, const CellAddress& cell) {
  return CellModel(model).weak_at(cell);
}

double flip_probability(const ErrorModel& model, const CellAddress& cell,
                        bool stored_one) {
  return CellModel(model).flip_at(cell, stored_one);
}

double expected_ber(const ErrorModel& model, double ones_fraction) {
  return std::visit(
      overloaded{[](const UniformModel& u) {
                   return u.weak_fraction * u.flip_probability;
                 },
                 [](const BitlineModel& b) {
                   return mean_product(b.weak_fraction, b.flip_probability);
                 },
                 [](const WordlineModel& w) {
                   return mean_product(w.weak_fraction, w.flip_probability);
                 },
                 [&](const DataDependentModel& d) {
                   return d.weak_fraction *
                          (ones_fraction * d.flip_probability_one +
                           (1.0 - ones_fraction) * d.flip_probability_zero);
                 }},
      model);
}

ErrorModel scale_to_ber(const ErrorModel& model, double target_ber,
                        double ones_fraction) {
  if (!(target_ber >= 0.0 && target_ber <= 1.0)) {
    throw Error("bad_ber", "target BER must lie in [0, 1]");
  }
  const double current = expected_ber(model, ones_fraction);
  if (current <= 0.0 && target_ber > 0.0) {
    throw Error("unscalable", "cannot rescale a model whose BER is zero");
  }
  // k == 0 zeroes every flip probability and leaves the weak cells alone.
  const double k = target_ber == 0.0 ? 0.0 : target_ber / current;

  double max_flip = 0.0;
  std::visit(overloaded{
                 [&](const UniformModel& u) { max_flip = u.flip_probability; },
                 [&](const BitlineModel& b) {
                   if (!b.flip_probability.empty()) {
                     max_flip = *std::max_element(b.flip_probability.begin(),
                                                  b.flip_probability.end());
                   }
                 },
                 [&](const WordlineModel& w) {
                   if (!w.flip_probability.empty()) {
                     max_flip = *std::max_element(w.flip_probability.begin(),
                                                  w.flip_probability.end());
                   }
                 },
                 [&](const DataDependentModel& d) {
                   max_flip = std::max(d.flip_probability_zero,
                                       d.flip_probability_one);
                 }},
             model);
  const double k_flip = std::min(k, 1.0 / max_flip);
  const double k_weak = k == 0.0 ? 1.0 : k / k_flip;
  auto sf = [&](double f) { return std::min(1.0, f * k_flip); };
  auto sw = [&](double p) { return std::min(1.0, p * k_weak); };

  ErrorModel out = model;
  std::visit(overloaded{
                 [&](UniformModel& u) {
                   u.flip_probability = sf(u.flip_probability);
                   u.weak_fraction = sw(u.weak_fraction);
                 },
                 [&](BitlineModel& b) {
                   for (auto& f : b.flip_probability) f = sf(f);
                   for (auto& p : b.weak_fraction) p = sw(p);
                 },
                 [&](WordlineModel& w) {
                   for (auto& f : w.flip_probability) f = sf(f);
                   for (auto& p : w.weak_fraction) p = sw(p);
                 },
                 [&](DataDependentModel& d) {
                   d.flip_probability_zero = sf(d.flip_probability_zero);
                   d.flip_probability_one = sf(d.flip_probability_one);
                   d.weak_fraction = sw(d.weak_fraction);
                 }},
             out);
  return out;
}

WeakCellMap::WeakCellMap(DramGeometry geom, std::uint64_t seed,
                         std::vector<std::uint64_t> sorted_cells)
    : geom_(geom), seed_(seed), cells_(std::move(sorted_cells)) {
  if (!std::is_sorted(cells_.begin(), cells_.end())) {
    std::sort(cells_.begin(), cells_.end());
  }
}

WeakCellMap WeakCellMap::generate(const ErrorModel& model,
                                  const DramGeometry& geom, std::uint64_t seed) {
  const CellRange all{0, geom.total_cells()};
  return generate(model, geom, seed, std::span<const CellRange>(&all, 1));
}

WeakCellMap WeakCellMap::generate(const ErrorModel& model,
                                  const DramGeometry& geom, std::uint64_t seed,
                                  std::span<const CellRange> ranges) {
  validate_model(model, geom);
  const CellModel cm(model);
  const CounterRng rng(seed);
  std::vector<std::uint64_t> cells;
  for (const auto& r : ranges) {
    const std::uint64_t end = std::min(r.end, geom.total_cells());
    if (cm.family == 0 || cm.family == 3) {
      if (cm.weak <= 0.0) continue;
      for (std::uint64_t i = r.begin; i < end; ++i) {
        if (rng.uniform(i) < cm.weak) cells.push_back(i);
      }
    } else {
      for (std::uint64_t i = r.begin; i < end; ++i) {
        const double p = cm.weak_at(geom.address(i));
        if (p > 0.0 && rng.uniform(i) < p) cells.push_back(i);
      }
    }
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return WeakCellMap(geom, seed, std::move(cells));
}

bool WeakCellMap::contains(std::uint64_t cell) const {
  return std::binary_search(cells_.begin(), cells_.end(), cell);
}

std::span<const std::uint64_t> WeakCellMap::in_range(std::uint64_t begin,
                                                     std::uint64_t end) const {
  auto lo = std::lower_bound(cells_.begin(), cells_.end(), begin);
  auto hi = std::lower_bound(lo, cells_.end(), end);
  return {lo, hi};
}

const Placement& LayoutDescriptor::find(std::string_view object_id) const {
  for (const auto& p : placements) {
    if (p.object_id == object_id) return p;
  }
  throw Error("unknown_object",
              "no placement for object '" + std::string(object_id) + "'");
}

LayoutDescriptor plan_layout(const DramGeometry& geom,
                             std::span<const LayoutRequest> objects,
                             LayoutMode mode, std::uint64_t seed,
                             const LayoutRegion& region) {
  geom.validate();
  const std::uint32_t bank_end = region.bank_end == 0 ? geom.banks : region.bank_end;
  const std::uint32_t row_end = region.row_end == 0 ? geom.rows_per_bank : region.row_end;
  if (bank_end > geom.banks || row_end > geom.rows_per_bank ||
      region.bank_begin >= bank_end || region.row_begin >= row_end) {
    throw Error("layout_overflow", "layout region outside the geometry");
  }
  const CounterRng shift_rng(derive_seed(seed, "layout-shift"));

  LayoutDescriptor out;
  out.mode = mode;
  std::uint32_t bank = region.bank_begin;
  // Cursor in bits from the start of row_begin within `bank`.
  std::uint64_t cursor = 0;
  const std::uint64_t region_bits =
      static_cast<std::uint64_t>(row_end - region.row_begin) * geom.bits_per_row;

  for (std::size_t k = 0; k < objects.size(); ++k) {
    const auto& obj = objects[k];
    std::uint64_t start = (cursor + geom.bits_per_row - 1) / geom.bits_per_row *
                          geom.bits_per_row;
    if (mode == LayoutMode::unaligned) {
      start += shift_rng.bits(k) % geom.bits_per_row;
    }
    if (start + obj.bits > region_bits) {
      // Move to the next bank of the region.
      ++bank;
      cursor = 0;
      start = mode == LayoutMode::unaligned ? shift_rng.bits(k) % geom.bits_per_row : 0;
      if (bank >= bank_end || start + obj.bits > region_bits) {
        throw Error("layout_overflow",
                    "object '" + obj.object_id + "' (" + std::to_string(obj.bits) +
                        " bits) does not fit in the layout region");
      }
    }
    Placement p;
    p.object_id = obj.object_id;
    p.bank = bank;
    p.start_row = region.row_begin + static_cast<std::uint32_t>(start / geom.bits_per_row);
    p.start_bit = static_cast<std::uint32_t>(start % geom.bits_per_row);
    p.length_bits = obj.bits;
    out.placements.push_back(std::move(p));
    cursor = start + obj.bits;
  }
  return out;
}

void validate_layout(const LayoutDescriptor& layout, const DramGeometry& geom) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  for (const auto& p : layout.placements) {
    if (p.bank >= geom.banks || p.start_row >= geom.rows_per_bank ||
        p.start_bit >= geom.bits_per_row) {
      throw Error("layout_overflow", "placement of '" + p.object_id +
                                         "' starts outside the geometry");
    }
    const std::uint64_t offset =
        static_cast<std::uint64_t>(p.start_row) * geom.bits_per_row + p.start_bit;
    if (offset + p.length_bits > geom.cells_per_bank()) {
      throw Error("layout_overflow",
                  "object '" + p.object_id + "' does not fit inside its bank");
    }
    const auto r = p.cells(geom);
    spans.emplace_back(r.begin, r.end);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) {
      throw Error("layout_overflow", "placements overlap");
    }
  }
}

void FlipTrace::add(const CellAddress& cell, FlipDirection dir) {
  ++total_flips;
  if (records.size() < kMaxRecords) {
    records.push_back({cell.bank, cell.row, cell.bit, dir});
  } else {
    truncated = true;
    ++overflow_row_counts[{cell.bank, cell.row}];
  }
}

std::uint64_t inject_in_place(BitImage& img, const Placement& placement,
                              const WeakCellMap& map, const ErrorModel& model,
                              std::uint64_t access_seed, FlipTrace* trace) {
  const DramGeometry& geom = map.geometry();
  if (img.size_bits() > placement.length_bits) {
    throw Error("layout_overflow", "image of " + std::to_string(img.size_bits()) +
                                       " bits exceeds placement '" +
                                       placement.object_id + "'");
  }
  const std::uint64_t offset =
      static_cast<std::uint64_t>(placement.start_row) * geom.bits_per_row +
      placement.start_bit;
  if (placement.bank >= geom.banks ||
      offset + img.size_bits() > geom.cells_per_bank()) {
    throw Error("layout_overflow", "placement '" + placement.object_id +
                                       "' overflows its bank");
  }
  const CellModel cm(model);
  const CounterRng rng(access_seed);
  const std::uint64_t first = placement.first_cell(geom);
  std::uint64_t flips = 0;
  for (std::uint64_t cell : map.in_range(first, first + img.size_bits())) {
    const std::size_t bit = static_cast<std::size_t>(cell - first);
    const bool stored = img.test(bit);
    double p;
    if (cm.family == 0) {
      p = cm.flip;
    } else if (cm.family == 3) {
      p = stored ? cm.flip_one : cm.flip_zero;
    } else {
      p = cm.flip_at(geom.address(cell), stored);
    }
    if (p > 0.0 && rng.uniform(cell) < p) {
      img.flip(bit);
      ++flips;
      if (trace != nullptr) {
        trace->add(geom.address(cell), stored ? FlipDirection::one_to_zero
                                              : FlipDirection::zero_to_one);
      }
    }
  }
  return flips;
}

InjectionResult inject(const BitImage& img, const Placement& placement,
                       const WeakCellMap& map, const ErrorModel& model,
                       std::uint64_t access_seed) {
  validate_model(model, map.geometry());
  InjectionResult out{img, {}};
  inject_in_place(out.image, placement, map, model, access_seed, &out.trace);
  return out;
}

InjectionResult inject(const BitImage& img, const LayoutDescriptor& layout,
                       std::string_view object_id, const WeakCellMap& map,
                       const ErrorModel& model, std::uint64_t access_seed) {
  validate_layout(layout, map.geometry());
  return inject(img, layout.find(object_id), map, model, access_seed);
}

}  // namespace dramtol
