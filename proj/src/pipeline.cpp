// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "dramtol/error.hpp"
#include "dramtol/model_fit.hpp"
#include "dramtol/rng.hpp"

namespace dramtol {

namespace {

Json coarse_to_json(const CoarseResult& r) {
  Json log = Json::array();
  for (const auto& p : r.log) {
    log.push_back({{"phase", p.phase}, {"ber", p.ber}, {"mean", p.mean}, {"drop", p.drop},
                   {"pass", p.pass}});
  }
  return Json{{"ber", r.ber},
              {"grid_index", r.grid_index},
              {"reference_accuracy", r.reference_accuracy},
              {"search_probes", r.search_probes},
              {"validation_probes", r.validation_probes},
              {"probes", log},
              {"warnings", r.warnings}};
}

Json accuracy_to_json(const AccuracyStats& s) {
  return Json{{"mean", s.mean}, {"std", s.std}, {"trials", s.trials}, {"per_trial", s.per_trial}};
}

std::string network_digest(const Network& net) {
  std::string bytes;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    for (double w : net.weights[i]) bytes.append(reinterpret_cast<const char*>(&w), sizeof w);
    for (double b : net.biases[i]) bytes.append(reinterpret_cast<const char*>(&b), sizeof b);
  }
  return json_digest(Json(fnv1a64(bytes)));
}

}  // namespace

Json config_to_json(const PipelineConfig& c) {
  return Json{{"seed", c.seed},
              {"dataset", std::string(dataset_kind_name(c.dataset))},
              {"samples", c.samples},
              {"classes", c.classes},
              {"topology", c.topology},
              {"hidden", c.hidden},
              {"dtype", std::string(c.dtype.name())},
              {"correction", std::string(correction_name(c.correction))},
              {"target_drop", c.target_drop},
              {"trials", c.trials},
              {"eval_trials", c.eval_trials},
              {"grid", c.grid},
              {"mode", c.mode},
              {"increment", c.increment},
              {"baseline_epochs", c.baseline_epochs},
              {"retrain_epochs", c.retrain_epochs},
              {"lr", c.lr},
              {"batch", c.batch},
              {"boost_factor", c.boost_factor},
              {"max_rounds", c.max_rounds},
              {"profile_point", op_to_json(c.profile_point)},
              {"profile_rounds", c.profile_rounds},
              {"eval_batch", c.eval_batch}};
}

Network make_network(const PipelineConfig& c, const Dataset& data, std::uint64_t seed) {
  Network net;
  if (c.topology == "mlp") {
    net = make_mlp(data.features, c.hidden, data.classes, seed);
  } else if (c.topology == "conv") {
    if (data.features != 64) throw Error("bad_topology", "conv topology needs 8x8 inputs");
    net = make_conv_net(data.classes, seed);
  } else {
    throw Error("bad_topology", "unknown topology '" + c.topology + "'");
  }
  net.dtype = c.dtype;
  return net;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const GroundTruthDevice& dev,
                            const Logger& log) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  if (cfg.mode != "coarse" && cfg.mode != "fine") {
    throw Error("bad_mode", "mode must be coarse or fine");
  }
  if (cfg.grid.empty()) throw Error("bad_grid", "grid is empty");
  const std::uint64_t seed = cfg.seed;
  Json seeds{{"root", seed}};
  auto stage = [&](const char* name) {
    const std::uint64_t s = derive_seed(seed, name);
    seeds[name] = s;
    return s;
  };
  const std::uint64_t s_profile = stage("profile");
  const std::uint64_t s_data = stage("data");
  const std::uint64_t s_init = stage("init");
  const std::uint64_t s_train = stage("train");
  const std::uint64_t s_retrain = stage("retrain");
  const std::uint64_t s_char = stage("characterize");
  const std::uint64_t s_eval = stage("evaluate");

  PipelineResult out;
  Json report{{"format", "dramtol-report/1"}, {"config", config_to_json(cfg)}};
  report["device_digest"] = json_digest(DeviceCodec::to_json(dev));

  // Device profiling and error-model fitting, one fit per partition.
  say("profiling device");
  const ErrorTrace trace = profile_device(dev, cfg.profile_point, cfg.profile_rounds, s_profile);
  Json fits = Json::array();
  PartitionId template_part = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  std::vector<ErrorModel> selected;
  for (const auto& p : dev.partitions()) {
    const ErrorTrace slice = trace.slice(p.bank, p.row_begin, p.row_end);
    const auto all = fit_all(slice);
    const auto sel = select_model(all);
    Json fj = fit_report_to_json(all, sel);
    fj["partition"] = p.id;
    fits.push_back(fj);
    selected.push_back(sel.model);
    if (const double gap = std::abs(p.ber_scale - 1.0); gap < best_gap) {
      best_gap = gap;
      template_part = p.id;
    }
  }
  DramEnv env;
  env.geometry = dev.geometry();
  env.base_model = selected[template_part];
  env.correction = cfg.correction;
  report["profile"] = {{"op", op_to_json(cfg.profile_point)},
                       {"rounds", cfg.profile_rounds},
                       {"flip_rate", static_cast<double>(trace.total_flips()) /
                                         static_cast<double>(trace.total_reads())},
                       {"fits", fits},
                       {"template_partition", template_part},
                       {"template_model", model_to_json(env.base_model)}};

  // Baseline.
  say("training baseline");
  const Dataset data = make_synthetic_dataset(cfg.samples, cfg.classes, s_data, cfg.dataset);
  report["dataset"] = dataset_to_json(data);
  TrainOptions topts;
  topts.epochs = cfg.baseline_epochs;
  topts.lr = cfg.lr;
  topts.batch = cfg.batch;
  topts.seed = s_train;
  auto base = train_baseline(make_network(cfg, data, s_init), data, topts);
  const double reference = clean_accuracy(base.net, data);

  CoarseOptions copts;
  copts.target_drop = cfg.target_drop;
  copts.trials = cfg.trials;
  copts.seed = s_char;
  say("characterizing baseline");
  const CoarseResult base_coarse =
      coarse_characterize(make_network_probe(base.net, base.thresholds, data, env), reference,
                          cfg.grid, copts);
  report["baseline"] = {{"clean_accuracy", reference},
                        {"model_digest", network_digest(base.net)},
                        {"coarse", coarse_to_json(base_coarse)}};

  // Boosting rounds.
  Network cur = base.net;
  Thresholds cur_thr = base.thresholds;
  CoarseResult cur_coarse = base_coarse;
  Json rounds = Json::array();
  TrainOptions ropts = topts;
  ropts.epochs = cfg.retrain_epochs;
  for (std::size_t r = 0; r < cfg.max_rounds; ++r) {
    const double from = cur_coarse.grid_index >= 0 ? cur_coarse.ber : cfg.grid.front();
    const double target = std::min(0.5, cfg.boost_factor * from);
    say("retraining round " + std::to_string(r + 1) + " at BER " + std::to_string(target));
    ropts.seed = derive_seed(s_retrain, r);
    const auto schedule = curricular_schedule(target, cfg.retrain_epochs);
    auto boosted = curricular_retrain(cur, cur_thr, data, env, schedule, ropts);
    const CoarseResult c = coarse_characterize(
        make_network_probe(boosted.net, boosted.thresholds, data, env), reference, cfg.grid,
        copts);
    const bool accepted = c.grid_index >= cur_coarse.grid_index + 1;
    rounds.push_back({{"round", r + 1},
                      {"target_ber", target},
                      {"schedule", schedule},
                      {"epoch_loss", boosted.epoch_loss},
                      {"clean_accuracy", clean_accuracy(boosted.net, data)},
                      {"coarse", coarse_to_json(c)},
                      {"accepted", accepted}});
    if (!accepted) break;
    cur = std::move(boosted.net);
    cur_thr = std::move(boosted.thresholds);
    cur_coarse = c;
  }
  report["boost"] = {
      {"rounds", rounds},
      {"tolerable_ber", cur_coarse.ber},
      {"grid_index", cur_coarse.grid_index},
      {"ratio", base_coarse.ber > 0.0 ? Json(cur_coarse.ber / base_coarse.ber) : Json(nullptr)},
      {"model_digest", network_digest(cur)}};

  // Characterization and mapping of the boosted model.
  CharacterizationResult ch;
  ch.mode = cfg.mode;
  ch.target_drop = cfg.target_drop;
  ch.reference_accuracy = reference;
  ch.coarse_ber = cur_coarse.ber;
  ch.coarse_index = cur_coarse.grid_index;
  ch.trials = cfg.trials;
  ch.seed = s_char;
  ch.grid = cfg.grid;
  ch.increment = cfg.increment;
  ch.probes = cur_coarse.search_probes + cur_coarse.validation_probes;
  ch.warnings = cur_coarse.warnings;
  const auto sizes = data_type_sizes(cur, cfg.eval_batch);
  const PartitionCatalog catalog = build_catalog(dev);
  MappingPlan plan;
  if (cfg.mode == "fine") {
    say("fine characterization");
    FineOptions fopts;
    fopts.target_drop = cfg.target_drop;
    fopts.increment = cfg.increment;
    fopts.trials = cfg.trials;
    fopts.seed = derive_seed(s_char, "fine");
    const auto types = cur.data_types();
    const FineResult fr = fine_characterize(make_network_probe(cur, cur_thr, data, env),
                                            reference, types, cur_coarse.ber, fopts);
    ch.per_type = fr.per_type;
    ch.probes += fr.probes;
    plan = fine_map(ch, sizes, catalog);
  } else {
    plan = coarse_plan(cur_coarse.ber, dev, sizes);
  }
  report["characterization"] = characterization_to_json(ch);
  report["plan"] = plan_to_json(plan);
  report["plan_violations"] = plan_violations(plan, catalog);

  // Closed-loop evaluation on the device.
  say("evaluating mapped model");
  const DramEnv mapped = apply_plan(plan, cur, dev, env);
  EvalOptions eopts;
  eopts.batch = cfg.eval_batch;
  const AccuracyStats acc =
      evaluate_accuracy(cur, cur_thr, data, &mapped, cfg.eval_trials, s_eval, eopts);
  const double drop = reference - acc.mean;
  report["evaluation"] = {{"accuracy", accuracy_to_json(acc)},
                          {"drop", drop},
                          {"within_target", drop <= cfg.target_drop + 1.0}};
  report["seeds"] = seeds;
  report["digest"] = json_digest(report);

  out.report = std::move(report);
  out.baseline = std::move(base.net);
  out.baseline_thresholds = std::move(base.thresholds);
  out.boosted = std::move(cur);
  out.boosted_thresholds = std::move(cur_thr);
  out.plan = std::move(plan);
  return out;
}

}  // namespace dramtol
