// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dramtol/dataset.hpp"
#include "dramtol/dram_env.hpp"
#include "dramtol/network.hpp"
#include "dramtol/training.hpp"

namespace dramtol {

/// What one accuracy probe runs: a global BER, optionally overridden per
/// data type.
struct ProbeRequest {
  double ber = 0.0;
  std::map<DataTypeId, double> per_type;
  std::size_t trials = 10;
  std::uint64_t seed = 0;
};

using AccuracyProbe = std::function<AccuracyStats(const ProbeRequest&)>;

/// Probe that evaluates `net` on the validation split under `env_template`
/// with the requested BERs.
AccuracyProbe make_network_probe(const Network& net, const Thresholds& thresholds,
                                 const Dataset& data, const DramEnv& env_template);

/// 10^-8 ... 10^-0.5 at 8 points per decade, then 0.3 (61 points).
std::vector<double> default_ber_grid();

/// Parses "default", "lo:hi:per_decade" or a comma-separated list.
std::vector<double> parse_grid(const std::string& spec);

struct ProbeRecord {
  std::string phase;  // "search", "validate", "sweep"
  double ber = 0.0;
  std::map<DataTypeId, double> per_type;
  double mean = 0.0;
  double drop = 0.0;
  bool pass = false;
};

struct CoarseOptions {
  double target_drop = 1.0;  // accuracy points
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  /// Re-check the answer with 3x the trials and fresh seeds, accepting a
  /// drop up to target + validation_slack.
  bool validate = true;
  double validation_slack = 1.0;
};

struct CoarseResult {
  double ber = 0.0;
  /// Index of `ber` in the grid; -1 when even the smallest BER fails.
  int grid_index = -1;
  double reference_accuracy = 0.0;
  std::size_t search_probes = 0;
  std::size_t validation_probes = 0;
  std::vector<ProbeRecord> log;
  std::vector<std::string> warnings;
};

/// Binary search over grid indices for the largest BER whose mean accuracy
/// drop (versus `reference_accuracy`) is at most the target. Assumes
/// accuracy is non-increasing in BER; uses ceil(log2(|grid| + 1)) probes.
CoarseResult coarse_characterize(const AccuracyProbe& probe, double reference_accuracy,
                                 std::span<const double> grid, const CoarseOptions& opts);

struct FineOptions {
  double target_drop = 1.0;
  double increment = 1.5;  // multiplicative
  double max_ber = 0.5;
  /// Starting point for types when the bootstrap BER is 0.
  double floor_ber = 1e-8;
  std::size_t trials = 10;
  std::uint64_t seed = 0;
};

struct FineResult {
  std::map<DataTypeId, double> per_type;
  double bootstrap_ber = 0.0;
  std::size_t probes = 0;
  std::vector<ProbeRecord> log;
};

/// Round-robin sweep over `types` (in the given order): each visit tries
/// BER * increment for one type with every other type at its current BER,
/// keeps it when the drop is within target, else reverts and retires the
/// type.
FineResult fine_characterize(const AccuracyProbe& probe, double reference_accuracy,
                             std::span<const DataTypeId> types, double bootstrap_ber,
                             const FineOptions& opts);

struct CharacterizationResult {
  std::string mode = "coarse";  // "coarse" or "fine"
  double target_drop = 1.0;
  double reference_accuracy = 0.0;
  double coarse_ber = 0.0;
  int coarse_index = -1;
  std::map<DataTypeId, double> per_type;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<double> grid;
  double increment = 1.5;
  std::size_t probes = 0;
  std::vector<std::string> warnings;
};

}  // namespace dramtol
