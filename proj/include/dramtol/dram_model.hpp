// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dramtol/numerics.hpp"

namespace dramtol {

struct CellAddress {
  std::uint32_t bank = 0;
  std::uint32_t row = 0;  // wordline within the bank
  std::uint32_t bit = 0;  // bitline within the row

  friend bool operator==(const CellAddress&, const CellAddress&) = default;
};

/// Banks x wordlines x bitlines. Cells are numbered bank-major, then row,
/// then bit, which is also the order objects are laid out in.
struct DramGeometry {
  std::uint32_t banks = 1;
  std::uint32_t rows_per_bank = 1;
  std::uint32_t bits_per_row = 1;

  std::uint64_t cells_per_bank() const {
    return static_cast<std::uint64_t>(rows_per_bank) * bits_per_row;
  }
  std::uint64_t total_cells() const { return cells_per_bank() * banks; }

  std::uint64_t linear(const CellAddress& a) const {
    return (static_cast<std::uint64_t>(a.bank) * rows_per_bank + a.row) *
               bits_per_row +
           a.bit;
  }
  CellAddress address(std::uint64_t index) const {
    CellAddress a;
    a.bit = static_cast<std::uint32_t>(index % bits_per_row);
    index /= bits_per_row;
    a.row = static_cast<std::uint32_t>(index % rows_per_bank);
    a.bank = static_cast<std::uint32_t>(index / rows_per_bank);
    return a;
  }

  void validate() const;

  friend bool operator==(const DramGeometry&, const DramGeometry&) = default;
};

// The four error-model families. Weak cells are drawn once per device;
// each access then flips every weak cell independently.

/// Family 0: uniform weak cells (P) with one flip probability (F_A).
struct UniformModel {
  double weak_fraction = 0.0;
  double flip_probability = 0.0;
};

/// Family 1: per-bitline weak fraction (P_B) and flip probability (F_B).
struct BitlineModel {
  std::vector<double> weak_fraction;
  std::vector<double> flip_probability;
};

/// Family 2: per-wordline weak fraction (P_W) and flip probability (F_W).
struct WordlineModel {
  std::vector<double> weak_fraction;
  std::vector<double> flip_probability;
};

/// Family 3: data-dependent flips; F_V0 for weak cells storing 0, F_V1 for
/// weak cells storing 1.
struct DataDependentModel {
  double weak_fraction = 0.0;
  double flip_probability_zero = 0.0;
  double flip_probability_one = 0.0;
};

using ErrorModel =
    std::variant<UniformModel, BitlineModel, WordlineModel, DataDependentModel>;

inline int family_of(const ErrorModel& m) { return static_cast<int>(m.index()); }

/// Throws `Error("bad_model")` when a probability is outside [0, 1] or a
/// per-line array does not match the geometry.
void validate_model(const ErrorModel& model, const DramGeometry& geom);

/// Weak probability of the cell's line (or the global P).
double weak_probability(const ErrorModel& model, const CellAddress& cell);

/// Flip probability of a weak cell holding `stored_one`.
double flip_probability(const ErrorModel& model, const CellAddress& cell,
                        bool stored_one);

/// Analytic bit error rate; `ones_fraction` only matters for family 3.
double expected_ber(const ErrorModel& model, double ones_fraction = 0.5);

/// Rescales a model so expected_ber(result) == target (up to clamping at
/// probability 1). Flip probabilities are scaled first, all by the same
/// factor; once the largest would exceed 1 the remaining factor goes into
/// the weak fractions. Line-to-line shape is preserved.
ErrorModel scale_to_ber(const ErrorModel& model, double target_ber,
                        double ones_fraction = 0.5);

/// A linear cell interval [begin, end).
struct CellRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

/// Sorted set of weak cells. A cell with linear index i is weak iff
/// uniform(seed, i) < P(cell), so maps drawn with the same seed and larger
/// weak fractions are supersets of maps with smaller ones.
class WeakCellMap {
 public:
  WeakCellMap() = default;
  WeakCellMap(DramGeometry geom, std::uint64_t seed,
              std::vector<std::uint64_t> sorted_cells);

  static WeakCellMap generate(const ErrorModel& model, const DramGeometry& geom,
                              std::uint64_t seed);
  /// Only cells inside `ranges` are considered; the rest are never weak.
  static WeakCellMap generate(const ErrorModel& model, const DramGeometry& geom,
                              std::uint64_t seed,
                              std::span<const CellRange> ranges);

  const DramGeometry& geometry() const { return geom_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }
  std::span<const std::uint64_t> cells() const { return cells_; }
  bool contains(std::uint64_t cell) const;
  std::span<const std::uint64_t> in_range(std::uint64_t begin,
                                          std::uint64_t end) const;

  friend bool operator==(const WeakCellMap&, const WeakCellMap&) = default;

 private:
  DramGeometry geom_;
  std::uint64_t seed_ = 0;
  std::vector<std::uint64_t> cells_;
};

enum class LayoutMode { aligned, unaligned };

/// One object laid out row-major from (bank, start_row, start_bit); bit j of
/// the object is cell linear(bank, start_row, start_bit) + j.
struct Placement {
  std::string object_id;
  std::uint32_t bank = 0;
  std::uint32_t start_row = 0;
  std::uint32_t start_bit = 0;
  std::uint64_t length_bits = 0;

  std::uint64_t first_cell(const DramGeometry& g) const {
    return g.linear({bank, start_row, start_bit});
  }
  CellRange cells(const DramGeometry& g) const {
    const auto b = first_cell(g);
    return {b, b + length_bits};
  }
};

struct LayoutDescriptor {
  std::vector<Placement> placements;
  LayoutMode mode = LayoutMode::aligned;

  const Placement& find(std::string_view object_id) const;
};

struct LayoutRequest {
  std::string object_id;
  std::uint64_t bits = 0;
};

/// Rows [row_begin, row_end) of banks [bank_begin, bank_end) available for
/// placement. row_end == 0 means "to the end of the bank".
struct LayoutRegion {
  std::uint32_t bank_begin = 0;
  std::uint32_t bank_end = 0;  // 0 = all banks
  std::uint32_t row_begin = 0;
  std::uint32_t row_end = 0;
};

/// Sequential row-major placement. Aligned mode starts every object at the
/// next row boundary so equal-width elements share bitlines across objects;
/// unaligned mode adds a per-object pseudo-random bit shift drawn from
/// `seed`. Throws `Error("layout_overflow")` when objects do not fit.
LayoutDescriptor plan_layout(const DramGeometry& geom,
                             std::span<const LayoutRequest> objects,
                             LayoutMode mode, std::uint64_t seed,
                             const LayoutRegion& region = {});

/// Overlap and bounds check; throws `Error("layout_overflow")`.
void validate_layout(const LayoutDescriptor& layout, const DramGeometry& geom);

enum class FlipDirection : std::uint8_t { zero_to_one, one_to_zero };

struct FlipRecord {
  std::uint32_t bank = 0;
  std::uint32_t row = 0;
  std::uint32_t bit = 0;
  FlipDirection direction = FlipDirection::zero_to_one;

  friend bool operator==(const FlipRecord&, const FlipRecord&) = default;
};

/// Flipped cells of one injection. Past kMaxRecords coordinates only
/// per-(bank, row) counts are kept.
struct FlipTrace {
  static constexpr std::size_t kMaxRecords = 10'000'000;

  std::vector<FlipRecord> records;
  std::uint64_t total_flips = 0;
  bool truncated = false;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> overflow_row_counts;

  void add(const CellAddress& cell, FlipDirection dir);

  friend bool operator==(const FlipTrace&, const FlipTrace&) = default;
};

struct InjectionResult {
  BitImage image;
  FlipTrace trace;
};

/// Reads `img` back through approximate DRAM: every weak cell covered by the
/// placement flips with its model probability, sampled from
/// uniform(access_seed, cell). Non-weak cells never flip.
InjectionResult inject(const BitImage& img, const Placement& placement,
                       const WeakCellMap& map, const ErrorModel& model,
                       std::uint64_t access_seed);
InjectionResult inject(const BitImage& img, const LayoutDescriptor& layout,
                       std::string_view object_id, const WeakCellMap& map,
                       const ErrorModel& model, std::uint64_t access_seed);

/// In-place variant used on hot paths. Returns the number of flips; appends
/// to `trace` when given.
std::uint64_t inject_in_place(BitImage& img, const Placement& placement,
                              const WeakCellMap& map, const ErrorModel& model,
                              std::uint64_t access_seed,
                              FlipTrace* trace = nullptr);

}  // namespace dramtol
