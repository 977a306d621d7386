// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dramtol/device_sim.hpp"
#include "dramtol/dram_model.hpp"

namespace dramtol {

struct FitResult {
  int family = 0;
  ErrorModel model;
  /// Log-likelihood of the per-read flip sequences (no binomial
  /// coefficients, so it is comparable across families).
  double log_likelihood = 0.0;
  std::size_t parameter_count = 0;
  std::uint64_t observations = 0;  // cells with at least one read
  int iterations = 0;
  bool converged = true;
  /// Every read of every cell flipped; parameters are clamped to 1.
  bool degenerate = false;
};

struct EmOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;
};

/// Maximum-likelihood parameters of one family. Families 0 and 3 use
/// expectation-maximisation over the latent weak indicator; families 1 and 2
/// use per-line factorial-moment estimates (mean k/n gives P*F, mean
/// k(k-1)/(n(n-1)) gives P*F^2).
FitResult fit_params(const ErrorTrace& trace, int family, const EmOptions& opts = {});

/// All four families, in family order.
std::vector<FitResult> fit_all(const ErrorTrace& trace, const EmOptions& opts = {});

double trace_log_likelihood(const ErrorTrace& trace, const ErrorModel& model);

struct SelectionOptions {
  /// Scores within this many nats of the best count as "very similar".
  double tie_nats = 2.0;
  /// Per-line models collapse to family 0 when max(F) - min(F) < f_spread
  /// and max(P) - min(P) < p_relative_spread * mean(P).
  double f_spread = 0.05;
  double p_relative_spread = 0.05;
  /// Score = log-likelihood - 0.5 * parameters * ln(observations).
  bool penalize = true;
};

struct ModelSelection {
  int family = 0;
  ErrorModel model;
  /// Family with the best score before the tie rule and demotion.
  int best_scoring_family = 0;
  bool tie_preferred_uniform = false;
  bool demoted = false;
  std::vector<double> scores;  // parallel to the input fits
};

double selection_score(const FitResult& fit, const SelectionOptions& opts = {});

/// Family-0 approximation of a per-line model: P = mean(P_line),
/// F = sum(P_line * F_line) / sum(P_line), which keeps the expected BER.
UniformModel uniform_approximation(const ErrorModel& per_line);

/// True when `model` is a per-line family whose lines are uniform enough for
/// the family-0 approximation.
bool approximates_uniform(const ErrorModel& model, const SelectionOptions& opts = {});

ModelSelection select_model(std::span<const FitResult> fits,
                            const SelectionOptions& opts = {});

}  // namespace dramtol
