// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dramtol/characterize.hpp"
#include "dramtol/device_sim.hpp"
#include "dramtol/dram_env.hpp"

namespace dramtol {

/// |delta_vdd| / 0.35 + |delta_trcd| / 6.0.
double aggressiveness(const OperatingPoint& op);

/// Strict total order: higher aggressiveness, then larger |delta_vdd|.
bool more_aggressive(const OperatingPoint& a, const OperatingPoint& b);

/// delta_vdd in {0, -0.05, ..., -0.35} x delta_trcd in {0, -0.5, ..., -6.0}.
std::vector<OperatingPoint> operating_lattice();

/// Most aggressive lattice point whose aggregate BER is within `tolerable_ber`.
OperatingPoint coarse_map(double tolerable_ber, const GroundTruthDevice& dev);

struct CatalogPoint {
  OperatingPoint op;
  double ber = 0.0;
};

struct CatalogEntry {
  PartitionId id = 0;
  std::uint64_t capacity_bytes = 0;
  /// Ascending aggressiveness and strictly ascending BER.
  std::vector<CatalogPoint> points;
};

struct PartitionCatalog {
  std::vector<CatalogEntry> entries;

  const CatalogEntry* find(PartitionId id) const;
  /// Throws `Error("bad_catalog")` on zero capacity, duplicate ids or points
  /// whose BER decreases with aggressiveness.
  void validate() const;
};

/// Per partition, the lattice points not dominated by a more aggressive
/// point with equal or lower BER.
PartitionCatalog build_catalog(const GroundTruthDevice& dev);

/// FNV-1a over a canonical rendering, as 16 hex digits.
std::string catalog_digest(const PartitionCatalog& catalog);

struct Assignment {
  PartitionId partition = 0;
  OperatingPoint op;
  double ber = 0.0;
};

struct MappingPlan {
  std::string mode = "fine";  // "coarse" or "fine"
  double coarse_tolerable_ber = 0.0;
  OperatingPoint coarse_point;
  std::map<std::string, Assignment> assignments;
  std::vector<std::string> spill;
  std::map<std::string, double> tolerance;
  std::map<std::string, std::uint64_t> sizes;
  std::string catalog_digest;
  std::vector<std::string> warnings;
};

/// Greedy assignment: data types in ascending (tolerance, name) order each
/// take the partition offering the most aggressive point with BER within
/// tolerance and remaining capacity >= size (ties: lower partition id).
/// Unplaceable data is spilled to nominal memory.
MappingPlan fine_map(const std::map<std::string, double>& tolerance,
                     const std::map<std::string, std::uint64_t>& sizes,
                     const PartitionCatalog& catalog);

/// Requires a fine characterization (`Error("not_fine")` otherwise).
MappingPlan fine_map(const CharacterizationResult& ch,
                     const std::map<std::string, std::uint64_t>& sizes,
                     const PartitionCatalog& catalog);

/// The whole module at coarse_map(tolerable_ber); data fills partitions
/// first-fit in name order.
MappingPlan coarse_plan(double tolerable_ber, const GroundTruthDevice& dev,
                        const std::map<std::string, std::uint64_t>& sizes);

/// Problems found in a plan; empty when every data type is assigned or
/// spilled exactly once, every assignment is within tolerance and the
/// catalog, and no partition is over capacity.
std::vector<std::string> plan_violations(const MappingPlan& plan,
                                         const PartitionCatalog& catalog);

/// Bytes a data type occupies at the given IFM batch capacity.
std::map<std::string, std::uint64_t> data_type_sizes(const Network& net,
                                                     std::size_t batch_capacity);

/// Environment in which each assigned data type sees its partition's
/// physical error model at its operating point, pinned to the partition's
/// bank and weak map. Spilled data sees no errors. Throws
/// `Error("unknown_partition")`.
DramEnv apply_plan(const MappingPlan& plan, const Network& net, const GroundTruthDevice& dev,
                   const DramEnv& base = {});

}  // namespace dramtol
