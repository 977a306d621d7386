// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dramtol/error.hpp"
#include "dramtol/model_fit.hpp"
#include "dramtol/serialization.hpp"
#include "dramtol/training.hpp"

using namespace dramtol;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "dramtol_serialization_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("error model roundtrip") {
  const std::vector<ErrorModel> models = {
      UniformModel{0.02, 0.5},
      BitlineModel{{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}},
      WordlineModel{{0.05, 0.06}, {0.7, 0.8}},
      DataDependentModel{0.02, 0.1, 0.4},
  };
  for (const auto& m : models) {
    const Json j = model_to_json(m);
    CHECK(j["family"].get<int>() == family_of(m));
    const ErrorModel back = model_from_json(j);
    CHECK(family_of(back) == family_of(m));
    CHECK(model_to_json(back) == j);
  }
  Json by_name = model_to_json(UniformModel{0.1, 0.2});
  by_name.erase("family");
  by_name["geometry"] = geometry_to_json({4, 256, 2048});
  CHECK(std::get<UniformModel>(model_from_json(by_name)).flip_probability == 0.2);
  CHECK(parse_family("wordline") == 2);
  CHECK(parse_family("3") == 3);
  CHECK_THROWS_AS(parse_family("gaussian"), Error);
  CHECK_THROWS_AS(model_from_json(Json{{"family", 0}}), Error);
  CHECK_THROWS_AS(model_from_json(Json{{"family", 0}, {"params", {{"weak_fraction", "x"}}}}),
                  Error);
}

TEST_CASE("device roundtrip") {
  const auto dev = default_vendor_profile(77);
  const Json j = DeviceCodec::to_json(dev);
  const auto back = DeviceCodec::from_json(j);
  CHECK(DeviceCodec::to_json(back) == j);
  CHECK(back.geometry() == dev.geometry());
  CHECK(back.seed() == dev.seed());
  for (const auto& p : dev.partitions()) {
    CHECK(back.weak_map_seed(p.id) == dev.weak_map_seed(p.id));
    for (const auto& op : {OperatingPoint{-0.25, 0}, OperatingPoint{-0.1, -4.0}}) {
      CHECK(back.ber_curve(p.id, op) == dev.ber_curve(p.id, op));
      CHECK(model_to_json(back.model_at(p.id, op)) == model_to_json(dev.model_at(p.id, op)));
    }
  }
}

TEST_CASE("fit report carries the selected model") {
  const auto t = simulate_trace(UniformModel{0.05, 0.3}, {1, 64, 256}, 20, 3, 4);
  const auto fits = fit_all(t);
  const auto sel = select_model(fits);
  const Json j = fit_report_to_json(fits, sel);
  const ErrorModel m = selected_model_from_report(j);
  CHECK(family_of(m) == sel.family);
  CHECK(model_to_json(m) == model_to_json(sel.model));
  // A bare model document is also accepted.
  CHECK(family_of(selected_model_from_report(model_to_json(UniformModel{0.1, 0.1}))) == 0);
}

TEST_CASE("characterization and plan roundtrip") {
  CharacterizationResult r;
  r.mode = "fine";
  r.reference_accuracy = 91.25;
  r.coarse_ber = 1e-3;
  r.coarse_index = 40;
  r.per_type = {{DataTypeId::parse("w0"), 1.5e-3}, {DataTypeId::parse("ifm1"), 3.375e-3}};
  r.grid = {1e-4, 1e-3, 1e-2};
  r.probes = 12;
  r.warnings = {"note"};
  const Json j = characterization_to_json(r);
  const auto back = characterization_from_json(j);
  CHECK(characterization_to_json(back) == j);
  CHECK(back.per_type == r.per_type);
  CHECK_THROWS_AS(characterization_from_json(Json{{"format", "other"}}), Error);

  MappingPlan p;
  p.assignments["w0"] = {2, {-0.3, -5.5}, 0.04};
  p.spill = {"ifm0"};
  p.tolerance = {{"w0", 0.05}, {"ifm0", 0.0}};
  p.sizes = {{"w0", 100}, {"ifm0", 50}};
  p.catalog_digest = "0123456789abcdef";
  const Json pj = plan_to_json(p);
  const auto pb = plan_from_json(pj);
  CHECK(plan_to_json(pb) == pj);
  CHECK(pb.assignments.at("w0").op == OperatingPoint{-0.3, -5.5});
  CHECK(pb.assignments.at("w0").partition == 2);
}

TEST_CASE("dataset descriptor regenerates and checks its digest") {
  const Dataset d = make_synthetic_dataset(200, 3, 9, DatasetKind::blobs);
  Json j = dataset_to_json(d);
  const Dataset back = dataset_from_json(j);
  CHECK(back.train_x == d.train_x);
  CHECK(back.val_y == d.val_y);
  j["digest"] = "0000000000000000";
  CHECK_THROWS_AS(dataset_from_json(j), Error);
  j = dataset_to_json(d);
  j["seed"] = 10;
  CHECK_THROWS_AS(dataset_from_json(j), Error);
}

TEST_CASE("environment roundtrip") {
  DramEnv env;
  env.base_model = DataDependentModel{0.02, 0.1, 0.4};
  env.layout = LayoutMode::unaligned;
  env.layout_seed = 5;
  env.map_seed = 6;
  env.correction = Correction::saturate;
  env.exponent_check = true;
  env.ber = 1e-3;
  env.ber_override[DataTypeId::parse("w1")] = 2e-3;
  TypeChannel ch;
  ch.model = UniformModel{0.1, 0.2};
  ch.bank = 3;
  ch.map_seed = 99;
  env.channels[DataTypeId::parse("ifm0")] = ch;
  const Json j = env_to_json(env);
  const DramEnv back = env_from_json(j);
  CHECK(env_to_json(back) == j);
  CHECK(back.map_seed == env.map_seed);
  CHECK(back.ber == env.ber);
  CHECK(back.channels.at(DataTypeId::parse("ifm0")).bank == 3u);
}

TEST_CASE("checkpoint roundtrip") {
  const Dataset d = make_synthetic_dataset(200, 4, 2);
  Network net = make_mlp(2, {8, 8}, 4, 3);
  TrainOptions o;
  o.epochs = 2;
  const auto r = train_baseline(net, d, o);
  const fs::path m = scratch("ck.json");
  write_checkpoint(m, r.net, r.thresholds, Json{{"note", 1}});
  const auto ck = read_checkpoint(m);
  CHECK(ck.net.layers == r.net.layers);
  CHECK(ck.net.dtype == r.net.dtype);
  REQUIRE(ck.net.weights.size() == r.net.weights.size());
  for (std::size_t i = 0; i < r.net.weights.size(); ++i) {
    for (std::size_t k = 0; k < r.net.weights[i].size(); ++k) {
      CHECK(ck.net.weights[i][k] == static_cast<double>(static_cast<float>(r.net.weights[i][k])));
    }
  }
  CHECK(ck.thresholds.observed == r.thresholds.observed);
  CHECK(ck.thresholds.margin == r.thresholds.margin);
  CHECK(ck.manifest["note"] == 1);
  CHECK_THROWS_AS(read_checkpoint(scratch("missing.json")), Error);
}

TEST_CASE("error trace file roundtrip") {
  const auto t = simulate_trace(UniformModel{0.1, 0.3}, {2, 8, 64}, 7, 1, 2);
  const auto bytes = serialize_error_trace(t);
  CHECK(bytes.size() == 4 + 1 + 12 + 16 + 4 + 8 + t.cells() * 8);
  CHECK(deserialize_error_trace(bytes) == t);
  const fs::path p = scratch("t.edtr");
  write_error_trace(p, t);
  CHECK(read_error_trace(p) == t);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_error_trace(bad), Error);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(deserialize_error_trace(bad), Error);
}

TEST_CASE("flip trace as JSON lines") {
  FlipTrace t;
  t.add({0, 1, 2}, FlipDirection::zero_to_one);
  t.add({3, 4, 5}, FlipDirection::one_to_zero);
  std::istringstream in(flip_trace_to_jsonl(t));
  std::vector<Json> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(Json::parse(line));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0]["bank"] == 0);
  CHECK(lines[0]["row"] == 1);
  CHECK(lines[0]["bit"] == 2);
  CHECK(lines[1]["bank"] == 3);
  CHECK(lines[0]["dir"] != lines[1]["dir"]);
}

TEST_CASE("json files and digests") {
  const Json j{{"b", 1}, {"a", {1.5, 2.5}}};
  const fs::path p = scratch("x.json");
  write_json(p, j);
  CHECK(read_json(p) == j);
  std::ifstream f(p);
  const std::string text((std::istreambuf_iterator<char>(f)), {});
  CHECK(text.back() == '\n');
  CHECK(json_digest(j).size() == 16);
  CHECK(json_digest(j) == json_digest(read_json(p)));
  CHECK(json_digest(j) != json_digest(Json{{"b", 2}}));
  CHECK_THROWS_AS(read_json(scratch("none.json")), Error);
}
