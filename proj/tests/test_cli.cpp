// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dramtol/cli.hpp"
#include "dramtol/serialization.hpp"
#include "dramtol/tensor_io.hpp"

using namespace dramtol;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dramtol");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  Run r;
  r.status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string dir() {
  const fs::path d = fs::temp_directory_path() / "dramtol_cli_test";
  fs::create_directories(d);
  return d.string() + "/";
}

}  // namespace

TEST_CASE("usage errors are JSON on stderr") {
  const auto r = cli({"gen-device", "--no-such-flag"});
  CHECK(r.status == 2);
  const Json e = Json::parse(r.err);
  CHECK(e["error"] == "usage");
  CHECK(cli({}).status == 2);
  CHECK(cli({"frobnicate"}).status == 2);
}

TEST_CASE("runtime errors are JSON on stderr") {
  const auto r = cli({"fit", "--trace", dir() + "does-not-exist.edtr"});
  CHECK(r.status == 1);
  CHECK(Json::parse(r.err).contains("message"));
  const auto m = cli({"map", "--char", dir() + "none.json", "--mode", "sideways"});
  CHECK(m.status == 1);
  CHECK(Json::parse(m.err)["error"] == "bad_mode");
  const auto p = cli({"profile", "--out", dir() + "x.edtr", "--vdd", "0.1"});
  CHECK(p.status == 1);
}

TEST_CASE("device profile, fit and report") {
  const std::string d = dir();
  REQUIRE(cli({"gen-device", "--seed", "3", "--out", d + "dev.json"}).status == 0);
  const auto dev = DeviceCodec::from_json(read_json(d + "dev.json"));
  CHECK(dev.partitions().size() == 4);
  const auto g = cli({"gen-device", "--seed", "3"});
  CHECK(Json::parse(g.out) == read_json(d + "dev.json"));

  REQUIRE(cli({"profile", "--device", d + "dev.json", "--vdd", "-0.25", "--trcd", "0",
               "--rounds", "2", "--out", d + "p.edtr"})
              .status == 0);
  const auto trace = read_error_trace(d + "p.edtr");
  CHECK(trace.rounds == 2);
  CHECK(trace.total_flips() > 0);

  const auto fit = cli({"fit", "--trace", d + "p.edtr", "--family", "uniform",
                        "--out", d + "fit.json"});
  REQUIRE(fit.status == 0);
  const auto m = selected_model_from_report(read_json(d + "fit.json"));
  CHECK(family_of(m) == 0);
  CHECK(expected_ber(m) > 0.0);

  const auto rep = cli({"report", "--inputs", d + "fit.json", d + "dev.json"});
  REQUIRE(rep.status == 0);
  const Json s = Json::parse(rep.out);
  CHECK(s["artifacts"].size() == 2);
  CHECK(s["artifacts"]["fit.json"]["digest"] == json_digest(read_json(d + "fit.json")));
}

TEST_CASE("inject") {
  const std::string d = dir();
  std::vector<float> v(256);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.01f * static_cast<float>(i) - 1.0f;
  write_tensor(d + "t.ednt", Tensor::from_floats({16, 16}, v));
  write_json(d + "zero.json", model_to_json(UniformModel{0.0, 0.0}));
  REQUIRE(cli({"inject", "--input", d + "t.ednt", "--model", d + "zero.json", "--out",
               d + "z.ednt", "--flips", d + "z.jsonl"})
              .status == 0);
  CHECK(read_file_bytes(d + "z.ednt") == read_file_bytes(d + "t.ednt"));

  write_json(d + "hot.json", model_to_json(UniformModel{1.0, 0.5}));
  REQUIRE(cli({"inject", "--input", d + "t.ednt", "--model", d + "hot.json", "--out",
               d + "h.ednt", "--flips", d + "h.jsonl", "--seed", "4"})
              .status == 0);
  const Tensor h = read_tensor(d + "h.ednt");
  const Tensor t = read_tensor(d + "t.ednt");
  CHECK_FALSE(h.bit_equal(t));
  std::ifstream fl(d + "h.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(fl, line);) ++lines;
  CHECK(lines > 1000);

  REQUIRE(cli({"inject", "--input", d + "t.ednt", "--model", d + "hot.json", "--out",
               d + "h2.ednt", "--seed", "4"})
              .status == 0);
  CHECK(read_file_bytes(d + "h2.ednt") == read_file_bytes(d + "h.ednt"));
}

TEST_CASE("train, eval, characterize and map") {
  const std::string d = dir();
  REQUIRE(cli({"gen-data", "--samples", "400", "--seed", "2", "--out", d + "data.json"})
              .status == 0);
  const auto tr = cli({"train", "--data", d + "data.json", "--epochs", "5", "--out",
                       d + "model.json"});
  REQUIRE(tr.status == 0);
  const double clean = Json::parse(tr.out)["clean_accuracy"].get<double>();

  const auto ev = cli({"eval", "--model", d + "model.json", "--data", d + "data.json",
                       "--ber", "0", "--trials", "2"});
  REQUIRE(ev.status == 0);
  const Json e = Json::parse(ev.out);
  CHECK(e["mean"].get<double>() == doctest::Approx(clean));
  CHECK(e["per_trial"].size() == 2);

  const auto ch = cli({"characterize", "--model", d + "model.json", "--data",
                       d + "data.json", "--grid", "1e-6:1e-2:1", "--trials", "2", "--out",
                       d + "char.json"});
  REQUIRE(ch.status == 0);
  const auto c = characterization_from_json(read_json(d + "char.json"));
  CHECK(c.mode == "coarse");
  CHECK(c.grid.size() == 5);

  const auto mp = cli({"map", "--char", d + "char.json", "--model", d + "model.json"});
  REQUIRE(mp.status == 0);
  const auto plan = plan_from_json(Json::parse(mp.out));
  CHECK(plan.mode == "coarse");
  CHECK(plan.spill.empty());
  CHECK(plan.assignments.size() == 6);

  const auto fine = cli({"map", "--char", d + "char.json", "--model", d + "model.json",
                         "--mode", "fine"});
  CHECK(fine.status == 1);
  CHECK(Json::parse(fine.err)["error"] == "not_fine");
}
