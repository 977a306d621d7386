// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "dramtol/characterize.hpp"
#include "dramtol/mapping.hpp"
#include "dramtol/model_fit.hpp"
#include "dramtol/pipeline.hpp"
#include "dramtol/rng.hpp"
#include "dramtol/training.hpp"

using namespace dramtol;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Dataset toy_data(std::uint64_t seed) { return make_synthetic_dataset(4000, 4, seed); }

TrainResult toy_model(const Dataset& d, std::uint64_t seed) {
  TrainOptions o;
  o.epochs = 50;
  o.seed = seed;
  return train_baseline(make_mlp(2, {64, 64}, 4, seed), d, o);
}

Outcome injection_statistics() {
  const DramGeometry g{1, 1000, 1000};
  StreamEngine eng(21);
  BitlineModel b;
  for (int i = 0; i < 1000; ++i) {
    b.weak_fraction.push_back(0.1 * eng.uniform());
    b.flip_probability.push_back(eng.uniform());
  }
  WordlineModel w;
  for (int i = 0; i < 1000; ++i) {
    w.weak_fraction.push_back(0.1 * eng.uniform());
    w.flip_probability.push_back(eng.uniform());
  }
  const std::vector<ErrorModel> models = {UniformModel{0.02, 0.5}, b, w,
                                          DataDependentModel{0.05, 0.1, 0.4}};
  const std::size_t bits = g.total_cells();
  BitImage img(8, bits / 8);
  for (std::size_t i = 0; i < bits; ++i) img.set(i, eng.uniform() < 0.5);
  const double ones = static_cast<double>(img.popcount()) / static_cast<double>(bits);
  const Placement whole{"image", 0, 0, 0, bits};

  Outcome o{true, ""};
  for (int fam = 0; fam < 4; ++fam) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto map = WeakCellMap::generate(models[fam], g, 100 + fam);
    const auto flips = inject(img, whole, map, models[fam], 200 + fam).trace.total_flips;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double p = expected_ber(models[fam], ones);
    const double n = static_cast<double>(bits);
    const double z = (static_cast<double>(flips) - n * p) / std::sqrt(n * p * (1 - p));
    const bool ok = std::abs(z) <= 3.0 && secs < 10.0;
    o.pass = o.pass && ok;
    o.detail += fmt("EM%d z=%+.2f %.2fs; ", fam, z, secs);
  }
  return o;
}

bool generating_or_demoted(const ModelSelection& s, int fam) {
  return s.family == fam || (s.family == 0 && s.demoted && (fam == 1 || fam == 2));
}

Outcome mle_recovery() {
  const DramGeometry big{1, 1000, 1000};
  const auto t0 = simulate_trace(UniformModel{0.01, 0.3}, big, 100, 31, 32);
  const auto u = std::get<UniformModel>(fit_params(t0, 0).model);
  const double ep = u.weak_fraction / 0.01 - 1, ef = u.flip_probability / 0.3 - 1;
  const auto t3 = simulate_trace(DataDependentModel{0.05, 0.05, 0.20}, big, 100, 33, 34);
  const auto d = std::get<DataDependentModel>(fit_params(t3, 3).model);
  const double e0 = d.flip_probability_zero / 0.05 - 1, e1 = d.flip_probability_one / 0.20 - 1;
  const double ep3 = d.weak_fraction / 0.05 - 1;
  const double er = d.flip_probability_one / d.flip_probability_zero / 4.0 - 1;
  bool pass = std::abs(ep) <= 0.10 && std::abs(ef) <= 0.10 && std::abs(ep3) <= 0.10 &&
              std::abs(e0) <= 0.15 && std::abs(e1) <= 0.15 && std::abs(er) <= 0.15;
  std::string detail = fmt("EM0 dP=%+.3f dF=%+.3f; EM3 dP=%+.3f dF0=%+.3f dF1=%+.3f; ", ep,
                           ef, ep3, e0, e1);

  const DramGeometry g{1, 128, 512};
  for (int fam = 0; fam < 4; ++fam) {
    int hits = 0;
    for (int trial = 0; trial < 20; ++trial) {
      StreamEngine eng(derive_seed(1000 + fam, static_cast<std::uint64_t>(trial)));
      ErrorModel m;
      if (fam == 0) {
        m = UniformModel{0.02 + 0.08 * eng.uniform(), 0.1 + 0.8 * eng.uniform()};
      } else if (fam == 3) {
        const double f0 = 0.05 + 0.2 * eng.uniform();
        m = DataDependentModel{0.02 + 0.08 * eng.uniform(), f0, f0 * (2 + 2 * eng.uniform())};
      } else {
        const std::uint32_t lines = fam == 1 ? g.bits_per_row : g.rows_per_bank;
        std::vector<double> p, f;
        for (std::uint32_t i = 0; i < lines; ++i) {
          p.push_back(0.02 + 0.1 * eng.uniform());
          f.push_back(0.1 + 0.8 * eng.uniform());
        }
        if (fam == 1) {
          m = BitlineModel{p, f};
        } else {
          m = WordlineModel{p, f};
        }
      }
      const auto t = simulate_trace(m, g, 40, eng(), eng());
      if (generating_or_demoted(select_model(fit_all(t)), fam)) ++hits;
    }
    pass = pass && hits >= 19;
    detail += fmt("EM%d %d/20; ", fam, hits);
  }
  return {pass, detail};
}

Outcome selection_rule() {
  auto fake = [](int fam, ErrorModel m, double ll) {
    FitResult f;
    f.family = fam;
    f.model = std::move(m);
    f.log_likelihood = ll;
    f.parameter_count = 2;
    f.observations = 10000;
    return f;
  };
  SelectionOptions o;
  o.penalize = false;
  bool pass = true;
  std::string detail;
  for (const double spread : {0.0, 0.02, 0.049, 0.051, 0.1}) {
    std::vector<double> f;
    for (int i = 0; i < 64; ++i) f.push_back(0.3 + spread * (i % 2));
    const BitlineModel b{std::vector<double>(64, 0.02), f};
    const std::vector<FitResult> fits = {fake(0, UniformModel{0.02, 0.3 + spread / 2}, -5000),
                                         fake(1, b, -4000)};
    const auto s = select_model(fits, o);
    const bool want_demoted = spread < 0.05;
    const bool ok = s.best_scoring_family == 1 && s.demoted == want_demoted &&
                    s.family == (want_demoted ? 0 : 1);
    const bool keeps_ber = !want_demoted ||
                           std::abs(expected_ber(s.model) - expected_ber(b)) < 1e-12;
    pass = pass && ok && keeps_ber;
    detail += fmt("spread %.3f -> EM%d; ", spread, s.family);
  }
  // A fitted trace from a near-uniform bitline device.
  std::vector<double> f;
  for (int i = 0; i < 512; ++i) f.push_back(0.3 + 0.02 * (i % 3) / 2.0);
  const auto t = simulate_trace(BitlineModel{std::vector<double>(512, 0.05), f}, {1, 256, 512},
                                40, 7, 8);
  const auto s = select_model(fit_all(t));
  pass = pass && s.family == 0;
  detail += fmt("fitted near-uniform bitlines -> EM%d", s.family);
  return {pass, detail};
}

Outcome coarse_table() {
  const auto dev = default_vendor_profile();
  struct Row {
    double ber;
    OperatingPoint want;
  };
  const std::vector<Row> rows = {{0.05, {-0.35, -6.0}}, {0.04, {-0.30, -5.5}},
                                 {0.005, {-0.10, -1.0}}};
  bool pass = true;
  std::string detail;
  for (const auto& r : rows) {
    const auto got = coarse_map(r.ber, dev);
    const bool ok = std::abs(got.delta_vdd - r.want.delta_vdd) < 1e-9 &&
                    std::abs(got.delta_trcd - r.want.delta_trcd) < 1e-9;
    pass = pass && ok;
    detail += fmt("%.1f%% -> (%.2f V, %.1f ns); ", r.ber * 100, got.delta_vdd, got.delta_trcd);
  }
  return {pass, detail};
}

Outcome bounding_correction() {
  const Dataset d = toy_data(1);
  const auto base = toy_model(d, 1);
  const auto grid = parse_grid("1e-6:1e-2:8");
  bool pass = true;
  double worst_off = 1e9, worst_sat = 1e9;
  double off_at_3 = 0, zero_at_3 = 0;
  for (const double ber : grid) {
    double mean[3];
    for (int c = 0; c < 3; ++c) {
      DramEnv env;
      env.correction = static_cast<Correction>(c);
      env.ber = ber;
      mean[c] = evaluate_accuracy(base.net, base.thresholds, d, &env, 20, 77).mean;
    }
    const double off = mean[0], zero = mean[1], sat = mean[2];
    worst_off = std::min(worst_off, zero - off);
    worst_sat = std::min(worst_sat, zero - sat);
    if (zero + 1.0 < off || zero + 1.0 < sat) pass = false;
    if (std::abs(ber - 1e-3) < 1e-12) {
      off_at_3 = off;
      zero_at_3 = zero;
    }
  }
  return {pass, fmt("%zu BERs; min(zero-off)=%+.2f min(zero-saturate)=%+.2f; at 1e-3 off=%.1f "
                    "zero=%.1f",
                    grid.size(), worst_off, worst_sat, off_at_3, zero_at_3)};
}

Outcome curricular_boost() {
  const auto grid = default_ber_grid();
  std::vector<double> matched_ratio, matched_steps, mismatched_steps;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset d = make_synthetic_dataset(4000, 4, seed, DatasetKind::images);
    TrainOptions o;
    o.epochs = 50;
    o.seed = seed;
    const auto base = train_baseline(make_mlp(64, {64, 64}, 4, seed), d, o);
    const double clean = clean_accuracy(base.net, d);

    // Device with a few bitlines far weaker than the rest.
    BitlineModel bl;
    bl.flip_probability.assign(2048, 0.5);
    StreamEngine eng(derive_seed(seed, "bad-bitlines"));
    for (int i = 0; i < 2048; ++i) bl.weak_fraction.push_back(eng.uniform() < 0.05 ? 0.5 : 0.002);
    DramEnv truth;
    truth.base_model = bl;
    truth.map_seed = derive_seed(seed, "device-map");

    const auto trace = simulate_trace(bl, {1, 512, 2048}, 20, derive_seed(seed, "fit-map"),
                                      derive_seed(seed, "fit-access"));
    DramEnv matched;
    matched.base_model = fit_params(trace, 1).model;
    DramEnv mismatched;
    mismatched.base_model = fit_params(trace, 0).model;

    CoarseOptions co;
    co.seed = seed;
    const auto b0 = coarse_characterize(make_network_probe(base.net, base.thresholds, d, truth),
                                        clean, grid, co);
    TrainOptions ro = o;
    ro.lr = 0.05;
    const auto schedule = curricular_schedule(std::min(0.5, 8.0 * b0.ber), 20);
    const auto rm = curricular_retrain(base.net, base.thresholds, d, matched, schedule, ro);
    const auto ru = curricular_retrain(base.net, base.thresholds, d, mismatched, schedule, ro);
    const auto cm = coarse_characterize(make_network_probe(rm.net, rm.thresholds, d, truth),
                                        clean, grid, co);
    const auto cu = coarse_characterize(make_network_probe(ru.net, ru.thresholds, d, truth),
                                        clean, grid, co);
    matched_ratio.push_back(b0.ber > 0 ? cm.ber / b0.ber : 0.0);
    matched_steps.push_back(cm.grid_index - b0.grid_index);
    mismatched_steps.push_back(cu.grid_index - b0.grid_index);
    detail += fmt("seed %llu base %.1e matched x%.2f mismatched x%.2f; ",
                  static_cast<unsigned long long>(seed), b0.ber, matched_ratio.back(),
                  b0.ber > 0 ? cu.ber / b0.ber : 0.0);
  }
  const double ratio = median(matched_ratio);
  const double ms = median(matched_steps), us = median(mismatched_steps);
  detail += fmt("median matched x%.2f (%g steps) vs mismatched %g steps", ratio, ms, us);
  return {ratio >= 2.0 && ms > us, detail};
}

Outcome characterization_soundness() {
  const auto g = default_ber_grid();
  const std::size_t budget =
      static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(g.size())))) + 1;
  bool exact = true;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::size_t calls = 0;
    const double theta = g[i];
    const AccuracyProbe step = [&](const ProbeRequest& r) {
      ++calls;
      AccuracyStats s;
      s.mean = r.ber <= theta ? 90.0 : 10.0;
      s.trials = r.trials;
      return s;
    };
    const auto r = coarse_characterize(step, 90.0, g, CoarseOptions{});
    exact = exact && r.ber == theta;
    worst = std::max(worst, calls);
  }

  const Dataset d = toy_data(2);
  const auto base = toy_model(d, 2);
  const double clean = clean_accuracy(base.net, d);
  const auto probe = make_network_probe(base.net, base.thresholds, d, DramEnv{});
  CoarseOptions co;
  co.seed = 5;
  const auto c = coarse_characterize(probe, clean, g, co);
  FineOptions fo;
  fo.seed = 6;
  const auto types = base.net.data_types();
  const auto f = fine_characterize(probe, clean, types, c.ber, fo);
  bool dominate = true;
  std::size_t raised = 0;
  for (const auto& t : types) {
    dominate = dominate && f.per_type.at(t) >= c.ber;
    if (f.per_type.at(t) > c.ber) ++raised;
  }
  return {exact && worst <= budget && dominate,
          fmt("step oracle exact=%d max probes %zu <= %zu; coarse %.2e, %zu/%zu types raised",
              exact, worst, budget, c.ber, raised, types.size())};
}

Outcome mapping_oracle() {
  const auto ref = default_vendor_profile();
  std::size_t fixtures = 0, mismatches = 0, infeasible = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    StreamEngine eng(derive_seed(seed, "fixture"));
    std::vector<PartitionInfo> parts;
    std::vector<ErrorModel> hidden;
    for (std::uint32_t i = 0; i < 3; ++i) {
      parts.push_back({i, i, 0, 256, 1 + eng.below(100), 0.2 + 2.8 * eng.uniform()});
      hidden.push_back(UniformModel{0.1, 0.5});
    }
    const GroundTruthDevice dev({3, 256, 2048}, parts, ref.vdd_curve(), ref.trcd_curve(),
                                hidden, seed);
    std::map<std::string, double> tol;
    std::map<std::string, std::uint64_t> sizes;
    for (const char* n : {"w0", "w1", "ifm0"}) {
      tol[n] = eng.below(8) == 0 ? 0.0 : std::pow(10.0, -3.0 + 2.0 * eng.uniform());
      sizes[n] = 1 + eng.below(100);
    }
    const auto cat = build_catalog(dev);
    const auto plan = fine_map(tol, sizes, cat);
    ++fixtures;
    if (!plan_violations(plan, cat).empty()) ++infeasible;

    // Brute force: in ascending (tolerance, name) order, enumerate every
    // (partition, lattice point) pair and keep the best feasible one.
    std::vector<std::pair<double, std::string>> order;
    for (const auto& [n, t] : tol) order.emplace_back(t, n);
    std::sort(order.begin(), order.end());
    std::map<PartitionId, std::uint64_t> room;
    for (const auto& p : parts) room[p.id] = p.capacity_bytes;
    for (const auto& [t, name] : order) {
      int best = -1;
      OperatingPoint best_op;
      for (const auto& p : parts) {
        if (room[p.id] < sizes[name]) continue;
        for (const auto& op : operating_lattice()) {
          if (dev.ber_curve(p.id, op) > t) continue;
          if (best < 0 || more_aggressive(op, best_op)) {
            best = static_cast<int>(p.id);
            best_op = op;
          }
        }
      }
      const auto it = plan.assignments.find(name);
      if (best < 0) {
        if (it != plan.assignments.end()) ++mismatches;
        continue;
      }
      room[static_cast<PartitionId>(best)] -= sizes[name];
      if (it == plan.assignments.end() || it->second.partition != static_cast<PartitionId>(best) ||
          !(it->second.op == best_op)) {
        ++mismatches;
      }
    }
  }
  return {mismatches == 0 && infeasible == 0,
          fmt("%zu fixtures, %zu mismatches, %zu infeasible plans", fixtures, mismatches,
              infeasible)};
}

Json first_report;

Outcome end_to_end() {
  const PipelineConfig cfg;
  const auto r = run_pipeline(cfg, default_vendor_profile());
  first_report = r.report;
  const auto& ev = r.report.at("evaluation");
  const double drop = ev.at("drop").get<double>();
  const std::size_t trials = ev.at("accuracy").at("trials").get<std::size_t>();
  const bool feasible = r.report.at("plan_violations").empty();
  return {drop <= cfg.target_drop + 1.0 && trials == 30 && feasible,
          fmt("mode %s, %zu assigned / %zu spilled, drop %.3f over %zu trials",
              r.plan.mode.c_str(), r.plan.assignments.size(), r.plan.spill.size(), drop,
              trials)};
}

Outcome determinism() {
  const auto r = run_pipeline(PipelineConfig{}, default_vendor_profile());
  const std::string a = first_report.dump(2), b = r.report.dump(2);
  return {!first_report.is_null() && a == b,
          fmt("report %zu bytes, digest %s vs %s", a.size(), json_digest(first_report).c_str(),
              json_digest(r.report).c_str())};
}

Outcome gradient_check() {
  struct Case {
    Network net;
    Dataset data;
  };
  std::vector<Case> cases;
  cases.push_back({make_mlp(2, {64, 64}, 4, 3), make_synthetic_dataset(200, 4, 3)});
  cases.push_back(
      {make_conv_net(4, 4), make_synthetic_dataset(200, 4, 4, DatasetKind::images)});
  double worst = 0.0;
  std::size_t checked = 0;
  for (auto& c : cases) {
    Network& net = c.net;
    const std::size_t batch = 16, in = net.input_size();
    const std::vector<double> x(c.data.train_x.begin(), c.data.train_x.begin() + batch * in);
    const std::span<const std::uint32_t> y(c.data.train_y.data(), batch);
    auto loss = [&] {
      return softmax_cross_entropy(forward(net, x, batch).logits(), y, 4, nullptr);
    };
    const auto t = forward(net, x, batch);
    std::vector<double> dlogits;
    softmax_cross_entropy(t.logits(), y, 4, &dlogits);
    const Gradients g = backward(net, t, dlogits);
    StreamEngine eng(17);
    const auto layers = net.parameterized_layers();
    for (int k = 0; k < 200; ++k) {
      const std::size_t l = layers[eng.below(layers.size())];
      const bool bias = eng.below(4) == 0;
      auto& p = bias ? net.biases[l] : net.weights[l];
      const std::size_t i = eng.below(p.size());
      const double analytic = bias ? g.biases[l][i] : g.weights[l][i];
      const double h = 1e-5, keep = p[i];
      p[i] = keep + h;
      const double up = loss();
      p[i] = keep - h;
      const double down = loss();
      p[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
      ++checked;
    }
  }
  return {worst < 1e-4, fmt("%zu parameters, max relative error %.2e", checked, worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"injection statistics", injection_statistics},
      {"MLE recovery and selection", mle_recovery},
      {"model-selection rule", selection_rule},
      {"coarse mapping table", coarse_table},
      {"bounding correction", bounding_correction},
      {"curricular boost", curricular_boost},
      {"characterization soundness", characterization_soundness},
      {"mapping oracle", mapping_oracle},
      {"end-to-end closure", end_to_end},
      {"determinism", determinism},
      {"gradient check", gradient_check},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s criterion %zu (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
