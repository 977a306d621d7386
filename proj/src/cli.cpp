// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dramtol/error.hpp"
#include "dramtol/model_fit.hpp"
#include "dramtol/pipeline.hpp"
#include "dramtol/rng.hpp"
#include "dramtol/serialization.hpp"
#include "dramtol/tensor_io.hpp"

namespace dramtol {

namespace {

struct Flags {
  std::uint64_t seed = 1;
  std::size_t trials = 10;
  double target_drop = 1.0;
  std::string grid = "default";
  std::string device;
  std::string model;
  std::string out;
  std::string mode = "coarse";
  std::string correction = "zero";
  std::string dtype = "fp32";

  std::string data;
  std::string error_model;
  std::string trace;
  std::string input;
  std::string characterization;
  std::string plan;
  std::string env;
  std::string flips;
  std::vector<std::string> inputs;
  std::string dataset = "spiral";
  std::string topology = "mlp";
  std::string family;
  std::size_t samples = 4000;
  std::uint32_t classes = 4;
  std::size_t epochs = 0;
  double lr = 0.05;
  double ber = -1.0;
  double vdd = 0.0;
  double trcd = 0.0;
  std::uint32_t rounds = 16;
  std::size_t batch = 100;
  double boost_factor = 8.0;
  std::size_t max_rounds = 5;
  std::size_t eval_trials = 30;
  bool exponent_check = false;
};

void need(const std::string& v, const char* flag) {
  if (v.empty()) throw Error("missing_flag", std::string(flag) + " is required");
}

void emit(const Flags& f, std::ostream& out, const Json& j) {
  if (f.out.empty()) {
    out << j.dump(2) << '\n';
  } else {
    write_json(f.out, j);
  }
}

GroundTruthDevice load_device(const Flags& f) {
  if (f.device.empty()) return default_vendor_profile();
  return DeviceCodec::from_json(read_json(f.device));
}

ErrorModel load_error_model(const Flags& f) {
  if (f.error_model.empty()) return DramEnv{}.base_model;
  return selected_model_from_report(read_json(f.error_model));
}

Dataset load_dataset(const Flags& f) {
  need(f.data, "--data");
  return dataset_from_json(read_json(f.data));
}

Checkpoint load_model(const Flags& f) {
  need(f.model, "--model");
  return read_checkpoint(f.model);
}

DramEnv build_env(const Flags& f) {
  DramEnv env;
  if (!f.env.empty()) {
    env = env_from_json(read_json(f.env));
  } else {
    env.base_model = load_error_model(f);
  }
  env.correction = parse_correction(f.correction);
  env.exponent_check = env.exponent_check || f.exponent_check;
  if (f.ber >= 0.0) env.ber = f.ber;
  env.validate();
  return env;
}

void check_mode(const std::string& m) {
  if (m != "coarse" && m != "fine") throw Error("bad_mode", "mode must be coarse or fine");
}

int cmd_gen_device(const Flags& f, std::ostream& out) {
  emit(f, out, DeviceCodec::to_json(default_vendor_profile(f.seed)));
  return 0;
}

int cmd_profile(const Flags& f, std::ostream&) {
  need(f.out, "--out");
  const auto dev = load_device(f);
  const OperatingPoint op{f.vdd, f.trcd};
  op.validate();
  if (f.rounds == 0) throw Error("bad_rounds", "--rounds must be >= 1");
  write_error_trace(f.out, profile_device(dev, op, f.rounds, f.seed));
  return 0;
}

int cmd_fit(const Flags& f, std::ostream& out) {
  need(f.trace, "--trace");
  const ErrorTrace trace = read_error_trace(f.trace);
  std::vector<FitResult> fits;
  if (f.family.empty()) {
    fits = fit_all(trace);
  } else {
    fits.push_back(fit_params(trace, parse_family(f.family)));
  }
  emit(f, out, fit_report_to_json(fits, select_model(fits)));
  return 0;
}

int cmd_gen_data(const Flags& f, std::ostream& out) {
  emit(f, out,
       dataset_to_json(make_synthetic_dataset(f.samples, f.classes, f.seed,
                                              parse_dataset_kind(f.dataset))));
  return 0;
}

int cmd_train(const Flags& f, std::ostream& out) {
  need(f.out, "--out");
  const Dataset data = load_dataset(f);
  PipelineConfig cfg;
  cfg.topology = f.topology;
  cfg.dtype = Dtype::parse(f.dtype);
  Network net = make_network(cfg, data, derive_seed(f.seed, "init"));
  TrainOptions o;
  o.epochs = f.epochs ? f.epochs : 50;
  o.lr = f.lr;
  o.seed = derive_seed(f.seed, "train");
  const auto r = train_baseline(std::move(net), data, o);
  const double acc = clean_accuracy(r.net, data);
  write_checkpoint(f.out, r.net, r.thresholds,
                   Json{{"training", {{"seed", f.seed},
                                      {"epochs", o.epochs},
                                      {"lr", o.lr},
                                      {"epoch_loss", r.epoch_loss},
                                      {"clean_accuracy", acc}}}});
  out << Json{{"clean_accuracy", acc}, {"model", f.out}}.dump() << '\n';
  return 0;
}

int cmd_inject(const Flags& f, std::ostream&) {
  need(f.input, "--input");
  need(f.out, "--out");
  const auto bytes = read_file_bytes(f.input);
  const Tensor t = deserialize_tensor(bytes);
  ErrorModel model = load_error_model(f);
  if (f.ber >= 0.0) model = f.ber == 0.0 ? ErrorModel{UniformModel{}} : scale_to_ber(model, f.ber);
  DramGeometry geom{4, 256, 2048};
  std::uint64_t map_seed = derive_seed(f.seed, "weak-map");
  Json doc = f.error_model.empty() ? Json::object() : read_json(f.error_model);
  if (doc.contains("seed")) map_seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("geometry")) {
    geom = geometry_from_json(doc["geometry"]);
  } else if (const auto* b = std::get_if<BitlineModel>(&model)) {
    geom.bits_per_row = static_cast<std::uint32_t>(b->weak_fraction.size());
  } else if (const auto* w = std::get_if<WordlineModel>(&model)) {
    geom.rows_per_bank = static_cast<std::uint32_t>(w->weak_fraction.size());
  }
  validate_model(model, geom);
  BitImage img = encode_bits(t);
  const LayoutRequest req{"tensor", img.size_bits()};
  const auto layout = plan_layout(geom, std::span(&req, 1), LayoutMode::aligned, f.seed);
  const Placement& p = layout.find("tensor");
  const CellRange range = p.cells(geom);
  const auto map = WeakCellMap::generate(model, geom, map_seed,
                                         std::span(&range, 1));
  FlipTrace trace;
  inject_in_place(img, p, map, model, derive_seed(f.seed, "access"), &trace);
  const Tensor corrupted = decode_bits(img, t.dtype(), t.shape(), t.scale());
  write_tensor(f.out, corrupted);
  if (!f.flips.empty()) {
    std::ofstream fl(f.flips, std::ios::binary);
    if (!fl) throw Error("io", "cannot write " + f.flips);
    fl << flip_trace_to_jsonl(trace);
  }
  return 0;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  const auto ck = load_model(f);
  const Dataset data = load_dataset(f);
  DramEnv env = build_env(f);
  if (!f.plan.empty()) {
    env = apply_plan(plan_from_json(read_json(f.plan)), ck.net, load_device(f), env);
  }
  EvalOptions eo;
  eo.batch = f.batch;
  const AccuracyStats st =
      evaluate_accuracy(ck.net, ck.thresholds, data, &env, f.trials, f.seed, eo);
  const double clean = clean_accuracy(ck.net, data);
  emit(f, out,
       Json{{"format", "dramtol-eval/1"},
            {"seed", f.seed},
            {"trials", f.trials},
            {"env", env_to_json(env)},
            {"clean_accuracy", clean},
            {"mean", st.mean},
            {"std", st.std},
            {"drop", clean - st.mean},
            {"per_trial", st.per_trial}});
  return 0;
}

int cmd_retrain(const Flags& f, std::ostream& out) {
  need(f.out, "--out");
  if (f.ber < 0.0) throw Error("missing_flag", "--ber (target BER) is required");
  const auto ck = load_model(f);
  const Dataset data = load_dataset(f);
  DramEnv env = build_env(f);
  env.ber.reset();
  TrainOptions o;
  o.epochs = f.epochs ? f.epochs : 20;
  o.lr = f.lr;
  o.seed = derive_seed(f.seed, "retrain");
  const auto schedule = curricular_schedule(f.ber, o.epochs);
  const auto r = curricular_retrain(ck.net, ck.thresholds, data, env, schedule, o);
  const double acc = clean_accuracy(r.net, data);
  write_checkpoint(f.out, r.net, r.thresholds,
                   Json{{"retraining", {{"seed", f.seed},
                                        {"target_ber", f.ber},
                                        {"schedule", schedule},
                                        {"lr", o.lr},
                                        {"epoch_loss", r.epoch_loss},
                                        {"error_model", model_to_json(env.base_model)},
                                        {"clean_accuracy", acc}}}});
  out << Json{{"clean_accuracy", acc}, {"model", f.out}}.dump() << '\n';
  return 0;
}

int cmd_characterize(const Flags& f, std::ostream& out) {
  check_mode(f.mode);
  const auto ck = load_model(f);
  const Dataset data = load_dataset(f);
  DramEnv env = build_env(f);
  env.ber.reset();
  const auto grid = parse_grid(f.grid);
  const double reference = clean_accuracy(ck.net, data);
  const auto probe = make_network_probe(ck.net, ck.thresholds, data, env);
  CoarseOptions co;
  co.target_drop = f.target_drop;
  co.trials = f.trials;
  co.seed = f.seed;
  const CoarseResult c = coarse_characterize(probe, reference, grid, co);
  CharacterizationResult r;
  r.mode = f.mode;
  r.target_drop = f.target_drop;
  r.reference_accuracy = reference;
  r.coarse_ber = c.ber;
  r.coarse_index = c.grid_index;
  r.trials = f.trials;
  r.seed = f.seed;
  r.grid = grid;
  r.probes = c.search_probes + c.validation_probes;
  r.warnings = c.warnings;
  if (f.mode == "fine") {
    FineOptions fo;
    fo.target_drop = f.target_drop;
    fo.trials = f.trials;
    fo.seed = derive_seed(f.seed, "fine");
    const auto types = ck.net.data_types();
    const FineResult fr = fine_characterize(probe, reference, types, c.ber, fo);
    r.per_type = fr.per_type;
    r.increment = fo.increment;
    r.probes += fr.probes;
  }
  emit(f, out, characterization_to_json(r));
  return 0;
}

int cmd_map(const Flags& f, std::ostream& out) {
  check_mode(f.mode);
  need(f.characterization, "--char");
  const auto ch = characterization_from_json(read_json(f.characterization));
  const auto dev = load_device(f);
  std::map<std::string, std::uint64_t> sizes;
  if (!f.model.empty()) sizes = data_type_sizes(read_checkpoint(f.model).net, f.batch);
  if (f.mode == "coarse") {
    emit(f, out, plan_to_json(coarse_plan(ch.coarse_ber, dev, sizes)));
  } else {
    need(f.model, "--model");
    emit(f, out, plan_to_json(fine_map(ch, sizes, build_catalog(dev))));
  }
  return 0;
}

int cmd_pipeline(const Flags& f, std::ostream& out) {
  check_mode(f.mode);
  PipelineConfig cfg;
  cfg.seed = f.seed;
  cfg.dataset = parse_dataset_kind(f.dataset);
  cfg.samples = f.samples;
  cfg.classes = f.classes;
  cfg.topology = f.topology;
  cfg.dtype = Dtype::parse(f.dtype);
  cfg.correction = parse_correction(f.correction);
  cfg.target_drop = f.target_drop;
  cfg.trials = f.trials;
  cfg.eval_trials = f.eval_trials;
  cfg.grid = parse_grid(f.grid);
  cfg.mode = f.mode;
  cfg.lr = f.lr;
  cfg.boost_factor = f.boost_factor;
  cfg.max_rounds = f.max_rounds;
  if (f.epochs) cfg.retrain_epochs = f.epochs;
  const auto dev = load_device(f);
  const auto r = run_pipeline(cfg, dev, [](const std::string& s) { std::clog << s << '\n'; });
  if (!f.model.empty()) write_checkpoint(f.model, r.boosted, r.boosted_thresholds);
  emit(f, out, r.report);
  return 0;
}

int cmd_report(const Flags& f, std::ostream& out) {
  if (f.inputs.empty()) throw Error("missing_flag", "--inputs is required");
  Json artifacts = Json::object();
  for (const auto& path : f.inputs) {
    const Json j = read_json(path);
    const std::string key = std::filesystem::path(path).filename().string();
    artifacts[key] = {{"digest", json_digest(j)}, {"content", j}};
  }
  Json summary = Json::object();
  for (const auto& [name, a] : artifacts.items()) {
    const Json& c = a["content"];
    if (!c.is_object()) continue;
    if (c.contains("boost")) summary["boost_ratio"] = c["boost"]["ratio"];
    if (c.contains("evaluation")) summary["mapped_drop"] = c["evaluation"]["drop"];
    if (c.contains("coarse_ber")) summary[name + ".coarse_ber"] = c["coarse_ber"];
    if (c.contains("drop") && c.contains("mean")) summary[name + ".drop"] = c["drop"];
  }
  emit(f, out, Json{{"format", "dramtol-summary/1"}, {"summary", summary},
                    {"artifacts", artifacts}});
  return 0;
}

void print_error(std::ostream& err, const std::string& code, const std::string& msg) {
  err << Json{{"error", code}, {"message", msg}}.dump() << '\n';
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Error-tolerant DNN inference on approximate DRAM"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* c) {
    c->add_option("--seed", f.seed, "Root seed");
    c->add_option("--out", f.out, "Output path (stdout when omitted for JSON)");
  };
  auto evalish = [&](CLI::App* c) {
    c->add_option("--model", f.model, "Model checkpoint manifest");
    c->add_option("--data", f.data, "Dataset descriptor");
    c->add_option("--error-model", f.error_model, "Error model or fit report JSON");
    c->add_option("--env", f.env, "Environment JSON");
    c->add_option("--trials", f.trials, "Trials per accuracy probe");
    c->add_option("--correction", f.correction, "off|zero|saturate")
        ->check(CLI::IsMember({"off", "zero", "saturate"}));
    c->add_option("--ber", f.ber, "Bit error rate");
    c->add_flag("--exponent-check", f.exponent_check, "fp32 sign/exponent bounding check");
  };

  auto* gen_device = app.add_subcommand("gen-device", "Write the default device profile");
  common(gen_device);

  auto* profile = app.add_subcommand("profile", "Profile a device into an error trace");
  common(profile);
  profile->add_option("--device", f.device, "Device profile JSON");
  profile->add_option("--vdd", f.vdd, "V_DD reduction in volts (<= 0)");
  profile->add_option("--trcd", f.trcd, "t_RCD reduction in ns (<= 0)");
  profile->add_option("--rounds", f.rounds, "Profiling rounds");

  auto* fit = app.add_subcommand("fit", "Fit error models to a trace");
  common(fit);
  fit->add_option("--trace", f.trace, "Error trace file")->required();
  fit->add_option("--family", f.family, "Fit a single family");

  auto* gen_data = app.add_subcommand("gen-data", "Write a dataset descriptor");
  common(gen_data);
  gen_data->add_option("--dataset", f.dataset, "spiral|blobs|images");
  gen_data->add_option("--samples", f.samples, "Sample count");
  gen_data->add_option("--classes", f.classes, "Class count");

  auto* train = app.add_subcommand("train", "Train a baseline model");
  common(train);
  train->add_option("--data", f.data, "Dataset descriptor")->required();
  train->add_option("--topology", f.topology, "mlp|conv");
  train->add_option("--dtype", f.dtype, "int4|int8|int16|fp32")
      ->check(CLI::IsMember({"int4", "int8", "int16", "fp32"}));
  train->add_option("--epochs", f.epochs, "Epochs");
  train->add_option("--lr", f.lr, "Learning rate");

  auto* inject = app.add_subcommand("inject", "Corrupt a tensor file through a model");
  common(inject);
  inject->add_option("--input", f.input, "EDNT tensor")->required();
  inject->add_option("--model", f.error_model, "Error model or fit report JSON");
  inject->add_option("--ber", f.ber, "Rescale the model to this BER");
  inject->add_option("--flips", f.flips, "Write flip records as JSON lines");

  auto* eval = app.add_subcommand("eval", "Accuracy under an environment");
  common(eval);
  evalish(eval);
  eval->add_option("--plan", f.plan, "Mapping plan to apply on --device");
  eval->add_option("--device", f.device, "Device profile JSON");
  eval->add_option("--batch", f.batch, "Evaluation batch");

  auto* retrain = app.add_subcommand("retrain", "Curricular retraining");
  common(retrain);
  evalish(retrain);
  retrain->add_option("--epochs", f.epochs, "Epochs");
  retrain->add_option("--lr", f.lr, "Learning rate");

  auto* characterize = app.add_subcommand("characterize", "Tolerable BER search");
  common(characterize);
  evalish(characterize);
  characterize->add_option("--mode", f.mode, "coarse|fine");
  characterize->add_option("--grid", f.grid, "default | lo:hi:per_decade | b1,b2,...");
  characterize->add_option("--target-drop", f.target_drop, "Accuracy drop target (points)");

  auto* map = app.add_subcommand("map", "Map data to operating points");
  common(map);
  map->add_option("--char", f.characterization, "Characterization JSON")->required();
  map->add_option("--device", f.device, "Device profile JSON");
  map->add_option("--model", f.model, "Model checkpoint (data sizes)");
  map->add_option("--mode", f.mode, "coarse|fine");
  map->add_option("--batch", f.batch, "IFM batch capacity");

  auto* pipeline = app.add_subcommand("pipeline", "Full profile/boost/characterize/map loop");
  common(pipeline);
  pipeline->add_option("--device", f.device, "Device profile JSON");
  pipeline->add_option("--model", f.model, "Write the boosted model here");
  pipeline->add_option("--trials", f.trials, "Trials per probe");
  pipeline->add_option("--eval-trials", f.eval_trials, "Trials of the final evaluation");
  pipeline->add_option("--target-drop", f.target_drop, "Accuracy drop target (points)");
  pipeline->add_option("--grid", f.grid, "BER grid");
  pipeline->add_option("--mode", f.mode, "coarse|fine");
  pipeline->add_option("--correction", f.correction, "off|zero|saturate")
      ->check(CLI::IsMember({"off", "zero", "saturate"}));
  pipeline->add_option("--dtype", f.dtype, "int4|int8|int16|fp32")
      ->check(CLI::IsMember({"int4", "int8", "int16", "fp32"}));
  pipeline->add_option("--dataset", f.dataset, "spiral|blobs|images");
  pipeline->add_option("--samples", f.samples, "Sample count");
  pipeline->add_option("--classes", f.classes, "Class count");
  pipeline->add_option("--topology", f.topology, "mlp|conv");
  pipeline->add_option("--epochs", f.epochs, "Retraining epochs per round");
  pipeline->add_option("--lr", f.lr, "Learning rate");
  pipeline->add_option("--boost-factor", f.boost_factor, "Retraining target multiplier");
  pipeline->add_option("--max-rounds", f.max_rounds, "Boosting rounds");

  auto* report = app.add_subcommand("report", "Merge artifacts into one summary");
  common(report);
  report->add_option("--inputs", f.inputs, "JSON artifacts")->required();

  // Pipeline defaults to the image set and fine mode.
  f.dataset = "spiral";
  for (int i = 1; i < argc; ++i) {
    if (std::string_view(argv[i]) == "pipeline") {
      f.dataset = "images";
      f.mode = "fine";
      break;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return 2;
  }

  try {
    if (*gen_device) return cmd_gen_device(f, out);
    if (*profile) return cmd_profile(f, out);
    if (*fit) return cmd_fit(f, out);
    if (*gen_data) return cmd_gen_data(f, out);
    if (*train) return cmd_train(f, out);
    if (*inject) return cmd_inject(f, out);
    if (*eval) return cmd_eval(f, out);
    if (*retrain) return cmd_retrain(f, out);
    if (*characterize) return cmd_characterize(f, out);
    if (*map) return cmd_map(f, out);
    if (*pipeline) return cmd_pipeline(f, out);
    if (*report) return cmd_report(f, out);
  } catch (const Error& e) {
    print_error(err, e.code(), e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    print_error(err, "schema", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what());
    return 1;
  }
  return 2;
}

}  // namespace dramtol
