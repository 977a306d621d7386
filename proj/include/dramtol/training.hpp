// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dramtol/dataset.hpp"
#include "dramtol/dram_env.hpp"
#include "dramtol/network.hpp"

namespace dramtol {

struct TrainOptions {
  std::size_t epochs = 50;
  double lr = 0.05;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Network net;
  Thresholds thresholds;
  std::vector<double> epoch_loss;
};

/// Mini-batch SGD on reliable memory. Thresholds record every weight value
/// seen during training and every IFM of every forward pass. Throws
/// `Error("divergence")` when the loss becomes NaN.
TrainResult train_baseline(Network init, const Dataset& data, const TrainOptions& opts);

/// Epochs 1-2 at BER 0, then a geometric ramp that doubles every two epochs
/// and ends at `target_ber`. With an odd number of ramp epochs the first
/// ramp step lasts one epoch.
std::vector<double> curricular_schedule(double target_ber, std::size_t total_epochs);

struct RetrainResult {
  Network net;
  /// Baseline thresholds widened after every epoch by the retrained weights
  /// and the IFMs of a clean pass over the training set.
  Thresholds thresholds;
  std::vector<double> epoch_loss;
};

/// One retraining epoch at `ber`: the forward pass reads weights and IFMs
/// through `env` (zero correction), the update goes to the clean master
/// weights. Deterministic in (net, ber, epoch, seed).
double retrain_epoch(Network& net, const Thresholds& thresholds, const Dataset& data,
                     const DramEnv& env, double ber, std::size_t epoch,
                     const TrainOptions& opts);

/// Throws `Error("accuracy_collapse")` after two consecutive NaN epochs.
RetrainResult curricular_retrain(Network net, const Thresholds& thresholds,
                                 const Dataset& data, const DramEnv& env,
                                 std::span<const double> schedule, const TrainOptions& opts);

struct AccuracyStats {
  double mean = 0.0;  // percent
  double std = 0.0;
  std::size_t trials = 0;
  std::vector<double> per_trial;
};

struct EvalOptions {
  std::size_t batch = 100;
  /// Skip storage rounding (reference double-precision inference).
  bool exact = false;
};

/// Validation accuracy in percent. Without an environment the result is
/// exact and identical for every trial; with one, trial t draws its weak map
/// and flips from derive_seed(seed, t).
AccuracyStats evaluate_accuracy(const Network& net, const Thresholds& thresholds,
                                const Dataset& data, const DramEnv* env, std::size_t trials,
                                std::uint64_t seed, const EvalOptions& opts = {});

double clean_accuracy(const Network& net, const Dataset& data);

}  // namespace dramtol
