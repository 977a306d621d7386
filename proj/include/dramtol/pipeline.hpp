// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dramtol/characterize.hpp"
#include "dramtol/device_sim.hpp"
#include "dramtol/mapping.hpp"
#include "dramtol/serialization.hpp"
#include "dramtol/training.hpp"

namespace dramtol {

struct PipelineConfig {
  std::uint64_t seed = 1;
  DatasetKind dataset = DatasetKind::images;
  std::size_t samples = 4000;
  std::uint32_t classes = 4;
  std::string topology = "mlp";  // "mlp" or "conv"
  std::vector<std::size_t> hidden{64, 64};
  Dtype dtype = kFp32;
  Correction correction = Correction::zero;
  double target_drop = 1.0;
  std::size_t trials = 10;
  std::size_t eval_trials = 30;
  std::vector<double> grid = default_ber_grid();
  std::string mode = "fine";  // "coarse" or "fine"
  double increment = 1.5;
  std::size_t baseline_epochs = 50;
  std::size_t retrain_epochs = 20;
  double lr = 0.05;
  std::size_t batch = 32;
  /// Retraining targets boost_factor x the current tolerable BER.
  double boost_factor = 8.0;
  std::size_t max_rounds = 5;
  OperatingPoint profile_point{-0.25, -2.0};
  std::uint32_t profile_rounds = 16;
  std::size_t eval_batch = 100;
};

Json config_to_json(const PipelineConfig& c);

/// Builds the configured topology for a dataset.
Network make_network(const PipelineConfig& c, const Dataset& data, std::uint64_t seed);

struct PipelineResult {
  Json report;
  Network baseline;
  Thresholds baseline_thresholds;
  Network boosted;
  Thresholds boosted_thresholds;
  MappingPlan plan;
};

using Logger = std::function<void(const std::string&)>;

/// Profile and fit the device, train the baseline, alternate curricular
/// retraining and coarse characterization until the tolerable BER stops
/// improving by a grid step (or max_rounds), then characterize, map and
/// evaluate on the device. The report holds no wall-clock data, so equal
/// inputs give byte-identical reports.
PipelineResult run_pipeline(const PipelineConfig& cfg, const GroundTruthDevice& dev,
                            const Logger& log = {});

}  // namespace dramtol
