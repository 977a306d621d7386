// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/model_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "dramtol/error.hpp"

namespace dramtol {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// k * log(p) with 0 * log(0) == 0.
inline double xlog(double k, double p) { return k == 0.0 ? 0.0 : k * std::log(p); }

// Per-read log-likelihood of one cell under a weak-mixture model.
double cell_log_likelihood(unsigned n0, unsigned k0, unsigned n1, unsigned k1,
                           double weak, double f0, double f1) {
  if (k0 + k1 > 0) {
    if (weak <= 0.0) return kNegInf;
    return std::log(weak) + xlog(k0, f0) + xlog(n0 - k0, 1.0 - f0) + xlog(k1, f1) +
           xlog(n1 - k1, 1.0 - f1);
  }
  const double silent = std::pow(1.0 - f0, n0) * std::pow(1.0 - f1, n1);
  return std::log((1.0 - weak) + weak * silent);
}

struct CountKey {
  std::uint16_t n0, k0, n1, k1;
};

inline std::uint64_t pack(const CountKey& c) {
  return static_cast<std::uint64_t>(c.n0) | (static_cast<std::uint64_t>(c.k0) << 16) |
         (static_cast<std::uint64_t>(c.n1) << 32) | (static_cast<std::uint64_t>(c.k1) << 48);
}

struct HistEntry {
  CountKey key;
  double count;
};

// Cells with identical counts are interchangeable for families 0 and 3.
std::vector<HistEntry> histogram(const ErrorTrace& t) {
  std::unordered_map<std::uint64_t, std::pair<CountKey, double>> h;
  for (std::size_t i = 0; i < t.cells(); ++i) {
    if (t.zero_reads[i] + t.one_reads[i] == 0) continue;
    const CountKey k{t.zero_reads[i], t.zero_flips[i], t.one_reads[i], t.one_flips[i]};
    auto& slot = h[pack(k)];
    slot.first = k;
    slot.second += 1.0;
  }
  std::vector<HistEntry> out;
  out.reserve(h.size());
  for (const auto& [_, v] : h) out.push_back({v.first, v.second});
  std::sort(out.begin(), out.end(), [](const HistEntry& a, const HistEntry& b) {
    return pack(a.key) < pack(b.key);
  });
  return out;
}

struct MixtureFit {
  double weak = 0.0, f0 = 0.0, f1 = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = true;
  bool degenerate = false;
};

// EM over the latent weak indicator. With `split` false one flip
// probability is shared by both stored values (family 0).
MixtureFit fit_mixture(const std::vector<HistEntry>& hist, bool split,
                       const EmOptions& opts) {
  MixtureFit fit;
  double cells = 0.0, flipping = 0.0, k_sum = 0.0, n_sum = 0.0;
  double k0_sum = 0.0, n0_sum = 0.0, k1_sum = 0.0, n1_sum = 0.0;
  bool all_flip = true;
  for (const auto& e : hist) {
    cells += e.count;
    const unsigned k = e.key.k0 + e.key.k1, n = e.key.n0 + e.key.n1;
    if (k != n) all_flip = false;
    if (k > 0) {
      flipping += e.count;
      k_sum += e.count * k;
      n_sum += e.count * n;
      k0_sum += e.count * e.key.k0;
      n0_sum += e.count * e.key.n0;
      k1_sum += e.count * e.key.k1;
      n1_sum += e.count * e.key.n1;
    }
  }
  if (cells == 0.0) throw Error("empty_trace", "trace has no reads");
  if (flipping == 0.0) {
    // No evidence of weak cells: P = 0, F unidentifiable (reported as 0).
    fit.log_likelihood = 0.0;
    return fit;
  }
  if (all_flip) {
    fit.weak = fit.f0 = fit.f1 = 1.0;
    fit.degenerate = true;
    fit.log_likelihood = 0.0;
    return fit;
  }
  fit.weak = flipping / cells;
  if (split) {
    fit.f0 = n0_sum > 0.0 ? k0_sum / n0_sum : 0.0;
    fit.f1 = n1_sum > 0.0 ? k1_sum / n1_sum : 0.0;
  } else {
    fit.f0 = fit.f1 = k_sum / n_sum;
  }

  fit.converged = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    double r_sum = 0.0, rk0 = 0.0, rn0 = 0.0, rk1 = 0.0, rn1 = 0.0;
    for (const auto& e : hist) {
      double r = 1.0;
      if (e.key.k0 + e.key.k1 == 0) {
        const double silent =
            std::pow(1.0 - fit.f0, e.key.n0) * std::pow(1.0 - fit.f1, e.key.n1);
        const double num = fit.weak * silent;
        const double den = (1.0 - fit.weak) + num;
        r = den > 0.0 ? num / den : 0.0;
      }
      const double w = r * e.count;
      r_sum += w;
      rk0 += w * e.key.k0;
      rn0 += w * e.key.n0;
      rk1 += w * e.key.k1;
      rn1 += w * e.key.n1;
    }
    const double weak = r_sum / cells;
    double f0, f1;
    if (split) {
      f0 = rn0 > 0.0 ? rk0 / rn0 : 0.0;
      f1 = rn1 > 0.0 ? rk1 / rn1 : 0.0;
    } else {
      f0 = f1 = (rn0 + rn1) > 0.0 ? (rk0 + rk1) / (rn0 + rn1) : 0.0;
    }
    const double change = std::max(
        {std::fabs(weak - fit.weak), std::fabs(f0 - fit.f0), std::fabs(f1 - fit.f1)});
    fit.weak = weak;
    fit.f0 = f0;
    fit.f1 = f1;
    fit.iterations = it + 1;
    if (change < opts.tolerance) {
      fit.converged = true;
      break;
    }
  }
  double ll = 0.0;
  for (const auto& e : hist) {
    ll += e.count * cell_log_likelihood(e.key.n0, e.key.k0, e.key.n1, e.key.k1, fit.weak,
                                        fit.f0, fit.f1);
  }
  fit.log_likelihood = ll;
  return fit;
}

struct LineMoments {
  double cells = 0.0, m1 = 0.0, m2 = 0.0;
  bool any_multi_read = false;
};

// Factorial-moment estimates of (P, F) for one line.
std::pair<double, double> line_estimate(const LineMoments& m) {
  if (m.cells == 0.0 || m.m1 == 0.0) return {0.0, 0.0};
  const double mean1 = m.m1 / m.cells;  // E[k/n] = P F
  const double mean2 = m.m2 / m.cells;  // E[k(k-1)/(n(n-1))] = P F^2
  if (!m.any_multi_read || mean2 <= 0.0) return {1.0, std::min(1.0, mean1)};
  double f = mean2 / mean1;
  double p = mean1 / f;
  if (f > 1.0) {
    f = 1.0;
    p = mean1;
  }
  if (p > 1.0) {
    p = 1.0;
    f = mean1;
  }
  return {p, f};
}

FitResult fit_per_line(const ErrorTrace& t, bool bitlines) {
  const auto& g = t.geometry;
  const std::size_t lines = bitlines ? g.bits_per_row : g.rows_per_bank;
  std::vector<LineMoments> mom(lines);
  std::uint64_t observations = 0;
  bool any_flip = false, all_flip = true;
  for (std::size_t i = 0; i < t.cells(); ++i) {
    const unsigned n = t.zero_reads[i] + t.one_reads[i];
    if (n == 0) continue;
    ++observations;
    const unsigned k = t.zero_flips[i] + t.one_flips[i];
    if (k > 0) any_flip = true;
    if (k != n) all_flip = false;
    const auto a = g.address(i);
    auto& m = mom[bitlines ? a.bit : a.row];
    m.cells += 1.0;
    m.m1 += static_cast<double>(k) / n;
    if (n >= 2) {
      m.any_multi_read = true;
      m.m2 += static_cast<double>(k) * (k - 1) / (static_cast<double>(n) * (n - 1));
    }
  }
  if (observations == 0) throw Error("empty_trace", "trace has no reads");

  std::vector<double> weak(lines), flip(lines);
  for (std::size_t l = 0; l < lines; ++l) {
    std::tie(weak[l], flip[l]) = line_estimate(mom[l]);
  }
  FitResult r;
  r.family = bitlines ? 1 : 2;
  if (bitlines) {
    r.model = BitlineModel{weak, flip};
  } else {
    r.model = WordlineModel{weak, flip};
  }
  r.parameter_count = 2 * lines;
  r.observations = observations;
  r.degenerate = any_flip && all_flip;
  r.log_likelihood = any_flip ? trace_log_likelihood(t, r.model) : 0.0;
  return r;
}

}  // namespace

double trace_log_likelihood(const ErrorTrace& t, const ErrorModel& model) {
  const auto& g = t.geometry;
  const int family = family_of(model);
  if (family == 1 || family == 2) {
    const auto& weak = family == 1 ? std::get<BitlineModel>(model).weak_fraction
                                   : std::get<WordlineModel>(model).weak_fraction;
    const auto& flip = family == 1 ? std::get<BitlineModel>(model).flip_probability
                                   : std::get<WordlineModel>(model).flip_probability;
    double ll = 0.0;
    for (std::size_t i = 0; i < t.cells(); ++i) {
      const unsigned n0 = t.zero_reads[i], n1 = t.one_reads[i];
      if (n0 + n1 == 0) continue;
      const auto a = g.address(i);
      const std::size_t l = family == 1 ? a.bit : a.row;
      ll += cell_log_likelihood(n0, t.zero_flips[i], n1, t.one_flips[i], weak[l], flip[l],
                                flip[l]);
    }
    return ll;
  }
  double weak, f0, f1;
  if (family == 0) {
    const auto& u = std::get<UniformModel>(model);
    weak = u.weak_fraction;
    f0 = f1 = u.flip_probability;
  } else {
    const auto& d = std::get<DataDependentModel>(model);
    weak = d.weak_fraction;
    f0 = d.flip_probability_zero;
    f1 = d.flip_probability_one;
  }
  double ll = 0.0;
  for (const auto& e : histogram(t)) {
    ll += e.count *
          cell_log_likelihood(e.key.n0, e.key.k0, e.key.n1, e.key.k1, weak, f0, f1);
  }
  return ll;
}

FitResult fit_params(const ErrorTrace& trace, int family, const EmOptions& opts) {
  if (trace.cells() == 0) throw Error("empty_trace", "trace has no cells");
  if (family == 1 || family == 2) return fit_per_line(trace, family == 1);
  if (family != 0 && family != 3) {
    throw Error("bad_family", "error-model family must be 0..3");
  }
  const auto hist = histogram(trace);
  const MixtureFit m = fit_mixture(hist, family == 3, opts);
  FitResult r;
  r.family = family;
  if (family == 0) {
    r.model = UniformModel{m.weak, m.f0};
    r.parameter_count = 2;
  } else {
    r.model = DataDependentModel{m.weak, m.f0, m.f1};
    r.parameter_count = 3;
  }
  r.log_likelihood = m.log_likelihood;
  for (const auto& e : hist) r.observations += static_cast<std::uint64_t>(e.count);
  r.iterations = m.iterations;
  r.converged = m.converged;
  r.degenerate = m.degenerate;
  return r;
}

std::vector<FitResult> fit_all(const ErrorTrace& trace, const EmOptions& opts) {
  std::vector<FitResult> out;
  for (int f = 0; f < 4; ++f) out.push_back(fit_params(trace, f, opts));
  return out;
}

double selection_score(const FitResult& fit, const SelectionOptions& opts) {
  if (!opts.penalize || fit.observations == 0) return fit.log_likelihood;
  return fit.log_likelihood - 0.5 * static_cast<double>(fit.parameter_count) *
                                  std::log(static_cast<double>(fit.observations));
}

UniformModel uniform_approximation(const ErrorModel& per_line) {
  const std::vector<double>* weak = nullptr;
  const std::vector<double>* flip = nullptr;
  if (const auto* b = std::get_if<BitlineModel>(&per_line)) {
    weak = &b->weak_fraction;
    flip = &b->flip_probability;
  } else if (const auto* w = std::get_if<WordlineModel>(&per_line)) {
    weak = &w->weak_fraction;
    flip = &w->flip_probability;
  } else {
    throw Error("bad_family", "uniform approximation needs a per-line model");
  }
  double p_sum = 0.0, pf_sum = 0.0;
  for (std::size_t i = 0; i < weak->size(); ++i) {
    p_sum += (*weak)[i];
    pf_sum += (*weak)[i] * (*flip)[i];
  }
  const double n = static_cast<double>(weak->size());
  return {n > 0 ? p_sum / n : 0.0, p_sum > 0 ? pf_sum / p_sum : 0.0};
}

bool approximates_uniform(const ErrorModel& model, const SelectionOptions& opts) {
  const std::vector<double>* weak = nullptr;
  const std::vector<double>* flip = nullptr;
  if (const auto* b = std::get_if<BitlineModel>(&model)) {
    weak = &b->weak_fraction;
    flip = &b->flip_probability;
  } else if (const auto* w = std::get_if<WordlineModel>(&model)) {
    weak = &w->weak_fraction;
    flip = &w->flip_probability;
  } else {
    return false;
  }
  if (weak->empty()) return false;
  // F of a line with no weak cells is unidentified and does not count.
  double f_min = 1.0, f_max = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < weak->size(); ++i) {
    if ((*weak)[i] <= 0.0) continue;
    any = true;
    f_min = std::min(f_min, (*flip)[i]);
    f_max = std::max(f_max, (*flip)[i]);
  }
  if (!any) return false;
  const auto [p_min, p_max] = std::minmax_element(weak->begin(), weak->end());
  double p_mean = 0.0;
  for (double p : *weak) p_mean += p;
  p_mean /= static_cast<double>(weak->size());
  return (f_max - f_min) < opts.f_spread &&
         (*p_max - *p_min) < opts.p_relative_spread * p_mean;
}

ModelSelection select_model(std::span<const FitResult> fits, const SelectionOptions& opts) {
  if (fits.empty()) throw Error("no_fits", "select_model needs at least one fit");
  ModelSelection sel;
  std::size_t best = 0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    sel.scores.push_back(selection_score(fits[i], opts));
    const bool better = sel.scores[i] > sel.scores[best] ||
                        (sel.scores[i] == sel.scores[best] && fits[i].family < fits[best].family);
    if (i > 0 && better) best = i;
  }
  sel.best_scoring_family = fits[best].family;
  std::size_t chosen = best;
  if (fits[best].family != 0) {
    for (std::size_t i = 0; i < fits.size(); ++i) {
      if (fits[i].family == 0 && sel.scores[best] - sel.scores[i] <= opts.tie_nats) {
        chosen = i;
        sel.tie_preferred_uniform = true;
        break;
      }
    }
  }
  sel.family = fits[chosen].family;
  sel.model = fits[chosen].model;
  if ((sel.family == 1 || sel.family == 2) && approximates_uniform(sel.model, opts)) {
    sel.model = uniform_approximation(sel.model);
    sel.family = 0;
    sel.demoted = true;
  }
  return sel;
}

}  // namespace dramtol
