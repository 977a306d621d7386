// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/characterize.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dramtol/error.hpp"
#include "dramtol/rng.hpp"

namespace dramtol {

AccuracyProbe make_network_probe(const Network& net, const Thresholds& thresholds,
                                 const Dataset& data, const DramEnv& env_template) {
  return [&net, &thresholds, &data, env_template](const ProbeRequest& req) {
    DramEnv env = env_template;
    env.ber = req.ber;
    env.ber_override = req.per_type;
    return evaluate_accuracy(net, thresholds, data, &env, req.trials, req.seed);
  };
}

std::vector<double> default_ber_grid() {
  std::vector<double> g;
  for (int i = 0;; ++i) {
    const double b = std::pow(10.0, -8.0 + i / 8.0);
    if (b > 0.3) break;
    g.push_back(b);
  }
  g.push_back(0.3);
  return g;
}

std::vector<double> parse_grid(const std::string& spec) {
  if (spec.empty() || spec == "default") return default_ber_grid();
  std::vector<double> g;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size()) throw Error("bad_grid", "cannot parse grid value '" + s + "'");
    return v;
  };
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw Error("bad_grid", "grid range must be lo:hi:per_decade");
    const double lo = number(parts[0]), hi = number(parts[1]), per = number(parts[2]);
    if (!(lo > 0.0 && hi >= lo && per >= 1.0)) {
      throw Error("bad_grid", "grid range needs 0 < lo <= hi and per_decade >= 1");
    }
    const double l0 = std::log10(lo);
    for (int i = 0;; ++i) {
      const double b = std::pow(10.0, l0 + i / per);
      if (b > hi * (1.0 + 1e-12)) break;
      g.push_back(b);
    }
  } else {
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) g.push_back(number(p));
  }
  if (g.empty()) throw Error("bad_grid", "grid is empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0 && g[i] <= 0.5) || (i > 0 && g[i] <= g[i - 1])) {
      throw Error("bad_grid", "grid must be strictly ascending within (0, 0.5]");
    }
  }
  return g;
}

CoarseResult coarse_characterize(const AccuracyProbe& probe, double reference_accuracy,
                                 std::span<const double> grid, const CoarseOptions& opts) {
  if (grid.empty()) throw Error("bad_grid", "grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw Error("bad_grid", "grid must be strictly ascending");
  }
  CoarseResult r;
  r.reference_accuracy = reference_accuracy;
  auto run = [&](std::string phase, double ber, std::size_t trials, std::uint64_t seed,
                 double allowed) {
    const AccuracyStats st = probe({ber, {}, trials, seed});
    ProbeRecord rec;
    rec.phase = std::move(phase);
    rec.ber = ber;
    rec.mean = st.mean;
    rec.drop = reference_accuracy - st.mean;
    rec.pass = rec.drop <= allowed;
    r.log.push_back(rec);
    return rec.pass;
  };

  // Invariant: grid[lo] passes (lo == -1: BER 0), grid[hi] fails (hi == n).
  int lo = -1, hi = static_cast<int>(grid.size());
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    ++r.search_probes;
    if (run("search", grid[mid], opts.trials, opts.seed, opts.target_drop)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  if (opts.validate) {
    const std::uint64_t vseed = derive_seed(opts.seed, "validate");
    while (lo >= 0) {
      ++r.validation_probes;
      if (run("validate", grid[lo], 3 * opts.trials, vseed,
              opts.target_drop + opts.validation_slack)) {
        break;
      }
      std::ostringstream w;
      w << "BER " << grid[lo] << " failed validation with " << 3 * opts.trials
        << " trials; stepping down";
      r.warnings.push_back(w.str());
      --lo;
    }
  }
  r.grid_index = lo;
  r.ber = lo >= 0 ? grid[lo] : 0.0;
  if (lo < 0) r.warnings.push_back("smallest grid BER fails the accuracy target");
  return r;
}

FineResult fine_characterize(const AccuracyProbe& probe, double reference_accuracy,
                             std::span<const DataTypeId> types, double bootstrap_ber,
                             const FineOptions& opts) {
  if (!(opts.increment > 1.0)) throw Error("bad_increment", "increment must exceed 1");
  FineResult r;
  r.bootstrap_ber = bootstrap_ber;
  for (const auto& t : types) r.per_type[t] = bootstrap_ber;
  std::vector<DataTypeId> live(types.begin(), types.end());
  while (!live.empty()) {
    std::vector<DataTypeId> next;
    for (const auto& t : live) {
      const double cur = r.per_type[t];
      const double cand = cur > 0.0 ? cur * opts.increment : opts.floor_ber;
      if (cand > opts.max_ber) continue;
      auto trial = r.per_type;
      trial[t] = cand;
      const AccuracyStats st = probe({0.0, trial, opts.trials, opts.seed});
      ++r.probes;
      ProbeRecord rec;
      rec.phase = "sweep";
      rec.per_type = trial;
      rec.ber = cand;
      rec.mean = st.mean;
      rec.drop = reference_accuracy - st.mean;
      rec.pass = rec.drop <= opts.target_drop;
      r.log.push_back(rec);
      if (rec.pass) {
        r.per_type[t] = cand;
        next.push_back(t);
      }
    }
    live = std::move(next);
  }
  return r;
}

}  // namespace dramtol
