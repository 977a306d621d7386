// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dramtol/dram_model.hpp"

namespace dramtol {

inline constexpr double kNominalVdd = 1.35;   // volts
inline constexpr double kNominalTrcd = 12.5;  // nanoseconds

/// Reduction from nominal V_DD / t_RCD. Both deltas are <= 0.
struct OperatingPoint {
  double delta_vdd = 0.0;   // volts
  double delta_trcd = 0.0;  // nanoseconds

  bool is_nominal() const { return delta_vdd == 0.0 && delta_trcd == 0.0; }
  void validate() const;

  friend bool operator==(const OperatingPoint&, const OperatingPoint&) = default;
};

/// Piecewise-linear BER versus reduction magnitude. BER is 0 up to `knee`,
/// rises linearly to the first anchor, interpolates linearly between
/// anchors and stays flat past the last one.
struct AnchorCurve {
  double knee = 0.0;
  std::vector<std::pair<double, double>> anchors;  // (|reduction|, BER), ascending

  double eval(double reduction) const;
};

using PartitionId = std::uint32_t;

struct PartitionInfo {
  PartitionId id = 0;
  std::uint32_t bank = 0;
  std::uint32_t row_begin = 0;
  std::uint32_t row_end = 0;
  std::uint64_t capacity_bytes = 0;
  /// Partition BER relative to the aggregate curve.
  double ber_scale = 1.0;
};

/// Read-back pattern used by profiling. Row pairs (2k, 2k+1) always hold
/// inverse data and swap every round.
enum class ProfilePattern { solid, checkered };

/// Synthetic DRAM whose errors follow a hidden error model per partition.
/// The hidden models are private: pipeline code sees only what profiling
/// and the public BER curves reveal.
class GroundTruthDevice {
 public:
  GroundTruthDevice(DramGeometry geometry, std::vector<PartitionInfo> partitions,
                    AnchorCurve vdd_curve, AnchorCurve trcd_curve,
                    std::vector<ErrorModel> hidden_reference, std::uint64_t seed);

  const DramGeometry& geometry() const { return geometry_; }
  const std::vector<PartitionInfo>& partitions() const { return partitions_; }
  const PartitionInfo& partition(PartitionId id) const;
  const AnchorCurve& vdd_curve() const { return vdd_curve_; }
  const AnchorCurve& trcd_curve() const { return trcd_curve_; }
  std::uint64_t seed() const { return seed_; }

  /// Max of the two axis curves.
  double aggregate_ber(const OperatingPoint& op) const;
  double ber_curve(PartitionId id, const OperatingPoint& op) const;

  /// Physical error behaviour of a partition at `op`: the hidden model with
  /// its flip probabilities rescaled to ber_curve(id, op).
  ErrorModel model_at(PartitionId id, const OperatingPoint& op) const;

  /// Seed of the frozen weak-cell draw of a partition.
  std::uint64_t weak_map_seed(PartitionId id) const;

 private:
  friend struct DeviceCodec;

  DramGeometry geometry_;
  std::vector<PartitionInfo> partitions_;
  AnchorCurve vdd_curve_;
  AnchorCurve trcd_curve_;
  std::vector<ErrorModel> hidden_;
  std::uint64_t seed_;
};

/// Vendor-A style device: 4 banks x 256 rows x 2048 bits, one partition per
/// bank, BER curves through the published anchor table, partition scales
/// {0.25, 0.5, 1, 2} normalised to a capacity-weighted mean of 1.
GroundTruthDevice default_vendor_profile(std::uint64_t seed = 0x5EEDull);

/// Per-cell read/flip counts split by the stored value.
struct ErrorTrace {
  DramGeometry geometry;
  OperatingPoint op;
  std::uint32_t rounds = 0;
  std::vector<std::uint16_t> zero_reads;
  std::vector<std::uint16_t> one_reads;
  std::vector<std::uint16_t> zero_flips;  // 0 -> 1 flips
  std::vector<std::uint16_t> one_flips;   // 1 -> 0 flips

  std::size_t cells() const { return zero_reads.size(); }
  std::uint64_t total_reads() const;
  std::uint64_t total_flips() const;
  std::uint64_t flips_zero_to_one() const;
  std::uint64_t flips_one_to_zero() const;

  /// Rows [row_begin, row_end) of one bank as a single-bank trace.
  ErrorTrace slice(std::uint32_t bank, std::uint32_t row_begin,
                   std::uint32_t row_end) const;
  /// Commutative count addition; geometries must match.
  void merge(const ErrorTrace& other);
  void validate() const;

  friend bool operator==(const ErrorTrace&, const ErrorTrace&) = default;
};

/// Profiles a bare error model: `rounds` reads of every cell with inverted
/// row-pair patterns, weak cells from `map_seed`, accesses from
/// `access_seed`.
ErrorTrace simulate_trace(const ErrorModel& model, const DramGeometry& geom,
                          std::uint32_t rounds, std::uint64_t map_seed,
                          std::uint64_t access_seed,
                          ProfilePattern pattern = ProfilePattern::solid);

ErrorTrace profile_device(const GroundTruthDevice& dev, const OperatingPoint& op,
                          std::uint32_t rounds, std::uint64_t seed,
                          ProfilePattern pattern = ProfilePattern::solid);

}  // namespace dramtol
