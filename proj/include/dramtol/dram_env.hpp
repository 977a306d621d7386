// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "dramtol/device_sim.hpp"
#include "dramtol/dram_model.hpp"
#include "dramtol/network.hpp"

namespace dramtol {

/// Fixed error behaviour for one data type, e.g. its mapped partition at
/// the mapped operating point.
struct TypeChannel {
  ErrorModel model = UniformModel{};
  std::optional<std::uint32_t> bank;      // place inside this bank only
  std::optional<std::uint64_t> map_seed;  // frozen weak-cell draw
};

/// Approximate DRAM as seen by a network. Per data type the error model is,
/// in order of precedence: an explicit channel, the base model scaled to a
/// per-type BER override, the base model scaled to `ber`, the base model.
struct DramEnv {
  ErrorModel base_model = UniformModel{0.02, 0.5};
  DramGeometry geometry{4, 256, 2048};
  LayoutMode layout = LayoutMode::aligned;
  std::uint64_t layout_seed = 0;
  /// Frozen weak map; unset draws a fresh map per trial (or epoch).
  std::optional<std::uint64_t> map_seed;
  Correction correction = Correction::zero;
  /// fp32 only: correct on the sign/exponent check instead of the full
  /// range comparison.
  bool exponent_check = false;
  std::optional<double> ber;
  std::map<DataTypeId, double> ber_override;
  std::map<DataTypeId, TypeChannel> channels;

  ErrorModel model_for(const DataTypeId& id) const;
  /// Throws `Error("bad_env")` on override BERs outside [0, 0.5].
  void validate() const;
};

struct LoadStats {
  std::uint64_t loads = 0;
  std::uint64_t bits = 0;
  std::uint64_t flips = 0;
  std::uint64_t corrected = 0;
};

/// A DramEnv bound to one network, one IFM batch capacity and one trial:
/// layout and weak maps are fixed, every load draws fresh flips.
class CompiledEnv {
 public:
  CompiledEnv(const DramEnv& env, const Network& net, const Thresholds& thresholds,
              std::size_t batch_capacity, std::uint64_t trial_seed);

  /// Stores `values` as data type `id`, reads them back through the
  /// environment and applies correction. `access` distinguishes reads of the
  /// same data type (batch counter).
  void load(const DataTypeId& id, std::span<double> values, std::uint64_t access);

  LoadFn loader(std::uint64_t access);

  const std::map<DataTypeId, LoadStats>& stats() const { return stats_; }
  const LayoutDescriptor& layout() const { return layout_; }
  /// Analytic BER seen by a data type (0 when it is not injected).
  double ber(const DataTypeId& id) const;

 private:
  struct Channel {
    ErrorModel model;
    Placement placement;
    WeakCellMap map;
    Bounds bounds;
    std::uint64_t index = 0;
    bool active = false;
  };

  Dtype dtype_;
  Correction correction_;
  bool exponent_check_;
  std::uint64_t trial_seed_;
  std::map<DataTypeId, Channel> channels_;
  std::map<DataTypeId, LoadStats> stats_;
  LayoutDescriptor layout_;
};

}  // namespace dramtol
