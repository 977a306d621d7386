// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dramtol/error.hpp"
#include "dramtol/rng.hpp"
#include "dramtol/tensor_io.hpp"

namespace dramtol {

namespace {

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error("schema", std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error("schema", std::string("field '") + key + "' has the wrong type");
  }
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error("schema", std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json bounds_to_json(const Bounds& b) { return Json{{"lo", b.lo}, {"hi", b.hi}}; }

}  // namespace

int parse_family(const std::string& name) {
  for (int f = 0; f < 4; ++f) {
    if (name == kFamilyNames[f] || name == std::to_string(f) || name == "EM" + std::to_string(f)) {
      return f;
    }
  }
  throw Error("bad_family", "unknown error-model family '" + name + "'");
}

Json model_to_json(const ErrorModel& m) {
  Json params;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DataDependentModel>) {
          params["weak_fraction"] = v.weak_fraction;
          params["flip_probability_zero"] = v.flip_probability_zero;
          params["flip_probability_one"] = v.flip_probability_one;
        } else {
          params["weak_fraction"] = v.weak_fraction;
          params["flip_probability"] = v.flip_probability;
        }
      },
      m);
  return Json{{"family", family_of(m)}, {"name", kFamilyNames[family_of(m)]}, {"params", params}};
}

ErrorModel model_from_json(const Json& j) {
  if (!j.is_object() || !(j.contains("family") || j.contains("name"))) {
    throw Error("schema", "missing field 'family'");
  }
  const Json& fam = j.contains("family") ? j["family"] : j["name"];
  int family = 0;
  if (fam.is_number_integer()) {
    family = fam.get<int>();
    if (family < 0 || family > 3) throw Error("bad_family", "family must be 0..3");
  } else if (fam.is_string()) {
    family = parse_family(fam.get<std::string>());
  } else {
    throw Error("schema", "field 'family' has the wrong type");
  }
  const Json& p = field(j, "params");
  switch (family) {
    case 0:
      return UniformModel{get<double>(p, "weak_fraction"), get<double>(p, "flip_probability")};
    case 1:
      return BitlineModel{get<std::vector<double>>(p, "weak_fraction"),
                          get<std::vector<double>>(p, "flip_probability")};
    case 2:
      return WordlineModel{get<std::vector<double>>(p, "weak_fraction"),
                           get<std::vector<double>>(p, "flip_probability")};
    default:
      return DataDependentModel{get<double>(p, "weak_fraction"),
                                get<double>(p, "flip_probability_zero"),
                                get<double>(p, "flip_probability_one")};
  }
}

Json op_to_json(const OperatingPoint& op) {
  return Json{{"delta_vdd", op.delta_vdd}, {"delta_trcd", op.delta_trcd}};
}

OperatingPoint op_from_json(const Json& j) {
  OperatingPoint op{get<double>(j, "delta_vdd"), get<double>(j, "delta_trcd")};
  op.validate();
  return op;
}

Json geometry_to_json(const DramGeometry& g) {
  return Json{{"banks", g.banks}, {"rows_per_bank", g.rows_per_bank},
              {"bits_per_row", g.bits_per_row}};
}

DramGeometry geometry_from_json(const Json& j) {
  DramGeometry g{get<std::uint32_t>(j, "banks"), get<std::uint32_t>(j, "rows_per_bank"),
                 get<std::uint32_t>(j, "bits_per_row")};
  g.validate();
  return g;
}

namespace {

Json curve_to_json(const AnchorCurve& c) {
  Json a = Json::array();
  for (const auto& [x, y] : c.anchors) a.push_back(Json::array({x, y}));
  return Json{{"knee", c.knee}, {"anchors", a}};
}

AnchorCurve curve_from_json(const Json& j) {
  AnchorCurve c;
  c.knee = get<double>(j, "knee");
  for (const auto& p : field(j, "anchors")) {
    if (!p.is_array() || p.size() != 2) throw Error("schema", "anchor must be [x, ber]");
    c.anchors.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return c;
}

}  // namespace

Json DeviceCodec::to_json(const GroundTruthDevice& dev) {
  Json parts = Json::array();
  for (const auto& p : dev.partitions_) {
    parts.push_back({{"id", p.id},
                     {"bank", p.bank},
                     {"row_begin", p.row_begin},
                     {"row_end", p.row_end},
                     {"capacity_bytes", p.capacity_bytes},
                     {"ber_scale", p.ber_scale}});
  }
  Json hidden = Json::array();
  for (const auto& m : dev.hidden_) hidden.push_back(model_to_json(m));
  return Json{{"format", "dramtol-device/1"},
              {"geometry", geometry_to_json(dev.geometry_)},
              {"partitions", parts},
              {"vdd_curve", curve_to_json(dev.vdd_curve_)},
              {"trcd_curve", curve_to_json(dev.trcd_curve_)},
              {"seed", dev.seed_},
              {"hidden", {{"opaque", true}, {"models", hidden}}}};
}

GroundTruthDevice DeviceCodec::from_json(const Json& j) {
  if (get<std::string>(j, "format") != "dramtol-device/1") {
    throw Error("schema", "not a device profile");
  }
  std::vector<PartitionInfo> parts;
  for (const auto& p : field(j, "partitions")) {
    parts.push_back({get<PartitionId>(p, "id"), get<std::uint32_t>(p, "bank"),
                     get<std::uint32_t>(p, "row_begin"), get<std::uint32_t>(p, "row_end"),
                     get<std::uint64_t>(p, "capacity_bytes"), get<double>(p, "ber_scale")});
  }
  std::vector<ErrorModel> hidden;
  for (const auto& m : field(field(j, "hidden"), "models")) {
    hidden.push_back(model_from_json(m));
  }
  return GroundTruthDevice(geometry_from_json(field(j, "geometry")), std::move(parts),
                           curve_from_json(field(j, "vdd_curve")),
                           curve_from_json(field(j, "trcd_curve")), std::move(hidden),
                           get<std::uint64_t>(j, "seed"));
}

Json fit_report_to_json(const std::vector<FitResult>& fits, const ModelSelection& sel) {
  Json fj = Json::array();
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    fj.push_back({{"family", kFamilyNames[f.family]},
                  {"model", model_to_json(f.model)},
                  {"log_likelihood", f.log_likelihood},
                  {"parameter_count", f.parameter_count},
                  {"observations", f.observations},
                  {"iterations", f.iterations},
                  {"converged", f.converged},
                  {"degenerate", f.degenerate},
                  {"score", i < sel.scores.size() ? sel.scores[i] : 0.0}});
  }
  return Json{{"format", "dramtol-fit/1"},
              {"fits", fj},
              {"selected",
               {{"family", kFamilyNames[sel.family]},
                {"model", model_to_json(sel.model)},
                {"best_scoring_family", kFamilyNames[sel.best_scoring_family]},
                {"tie_preferred_uniform", sel.tie_preferred_uniform},
                {"demoted", sel.demoted}}}};
}

ErrorModel selected_model_from_report(const Json& j) {
  if (j.contains("selected")) return model_from_json(field(field(j, "selected"), "model"));
  return model_from_json(j);
}

namespace {

Json per_type_to_json(const std::map<DataTypeId, double>& m) {
  Json j = Json::object();
  for (const auto& [id, b] : m) j[id.name()] = b;
  return j;
}

std::map<DataTypeId, double> per_type_from_json(const Json& j) {
  std::map<DataTypeId, double> m;
  for (const auto& [k, v] : j.items()) m[DataTypeId::parse(k)] = v.get<double>();
  return m;
}

}  // namespace

Json characterization_to_json(const CharacterizationResult& r) {
  return Json{{"format", "dramtol-characterization/1"},
              {"mode", r.mode},
              {"target_drop", r.target_drop},
              {"reference_accuracy", r.reference_accuracy},
              {"coarse_ber", r.coarse_ber},
              {"coarse_index", r.coarse_index},
              {"per_type", per_type_to_json(r.per_type)},
              {"trials", r.trials},
              {"seed", r.seed},
              {"grid", r.grid},
              {"increment", r.increment},
              {"probes", r.probes},
              {"warnings", r.warnings}};
}

CharacterizationResult characterization_from_json(const Json& j) {
  if (get<std::string>(j, "format") != "dramtol-characterization/1") {
    throw Error("schema", "not a characterization result");
  }
  CharacterizationResult r;
  r.mode = get<std::string>(j, "mode");
  r.target_drop = get<double>(j, "target_drop");
  r.reference_accuracy = get<double>(j, "reference_accuracy");
  r.coarse_ber = get<double>(j, "coarse_ber");
  r.coarse_index = get<int>(j, "coarse_index");
  r.per_type = per_type_from_json(field(j, "per_type"));
  r.trials = get<std::size_t>(j, "trials");
  r.seed = get<std::uint64_t>(j, "seed");
  r.grid = get<std::vector<double>>(j, "grid");
  r.increment = get<double>(j, "increment");
  r.probes = get<std::size_t>(j, "probes");
  r.warnings = get<std::vector<std::string>>(j, "warnings");
  return r;
}

Json plan_to_json(const MappingPlan& plan) {
  Json a = Json::object();
  for (const auto& [name, as] : plan.assignments) {
    a[name] = {{"partition", as.partition}, {"op", op_to_json(as.op)}, {"ber", as.ber}};
  }
  return Json{{"format", "dramtol-plan/1"},
              {"mode", plan.mode},
              {"coarse_tolerable_ber", plan.coarse_tolerable_ber},
              {"coarse_point", op_to_json(plan.coarse_point)},
              {"assignments", a},
              {"spill", plan.spill},
              {"tolerance", plan.tolerance},
              {"sizes", plan.sizes},
              {"catalog_digest", plan.catalog_digest},
              {"warnings", plan.warnings}};
}

MappingPlan plan_from_json(const Json& j) {
  if (get<std::string>(j, "format") != "dramtol-plan/1") {
    throw Error("schema", "not a mapping plan");
  }
  MappingPlan p;
  p.mode = get<std::string>(j, "mode");
  p.coarse_tolerable_ber = get<double>(j, "coarse_tolerable_ber");
  p.coarse_point = op_from_json(field(j, "coarse_point"));
  for (const auto& [name, a] : field(j, "assignments").items()) {
    p.assignments[name] = {get<PartitionId>(a, "partition"), op_from_json(field(a, "op")),
                           get<double>(a, "ber")};
  }
  p.spill = get<std::vector<std::string>>(j, "spill");
  p.tolerance = get<std::map<std::string, double>>(j, "tolerance");
  p.sizes = get<std::map<std::string, std::uint64_t>>(j, "sizes");
  p.catalog_digest = get<std::string>(j, "catalog_digest");
  p.warnings = get<std::vector<std::string>>(j, "warnings");
  return p;
}

std::string dataset_digest(const Dataset& d) {
  std::string bytes;
  auto put = [&](const void* p, std::size_t n) { bytes.append(static_cast<const char*>(p), n); };
  put(d.train_x.data(), d.train_x.size() * sizeof(float));
  put(d.train_y.data(), d.train_y.size() * sizeof(std::uint32_t));
  put(d.val_x.data(), d.val_x.size() * sizeof(float));
  put(d.val_y.data(), d.val_y.size() * sizeof(std::uint32_t));
  return hex64(fnv1a64(bytes));
}

Json dataset_to_json(const Dataset& d) {
  return Json{{"format", "dramtol-dataset/1"},
              {"kind", std::string(dataset_kind_name(d.kind))},
              {"samples", d.train_size() + d.val_size()},
              {"classes", d.classes},
              {"features", d.features},
              {"seed", d.seed},
              {"train", d.train_size()},
              {"validation", d.val_size()},
              {"digest", dataset_digest(d)}};
}

Dataset dataset_from_json(const Json& j) {
  if (get<std::string>(j, "format") != "dramtol-dataset/1") {
    throw Error("schema", "not a dataset descriptor");
  }
  Dataset d = make_synthetic_dataset(get<std::size_t>(j, "samples"),
                                     get<std::uint32_t>(j, "classes"),
                                     get<std::uint64_t>(j, "seed"),
                                     parse_dataset_kind(get<std::string>(j, "kind")));
  if (dataset_digest(d) != get<std::string>(j, "digest")) {
    throw Error("digest_mismatch", "regenerated dataset does not match its digest");
  }
  return d;
}

Json thresholds_to_json(const Thresholds& t) {
  Json obs = Json::object();
  for (const auto& [id, b] : t.observed) obs[id.name()] = bounds_to_json(b);
  return Json{{"margin", t.margin}, {"observed", obs}};
}

Thresholds thresholds_from_json(const Json& j) {
  Thresholds t;
  t.margin = get<double>(j, "margin");
  for (const auto& [k, v] : field(j, "observed").items()) {
    t.observed[DataTypeId::parse(k)] = {get<double>(v, "lo"), get<double>(v, "hi")};
  }
  return t;
}

Json env_to_json(const DramEnv& env) {
  Json j{{"format", "dramtol-env/1"},
         {"base_model", model_to_json(env.base_model)},
         {"geometry", geometry_to_json(env.geometry)},
         {"layout", env.layout == LayoutMode::aligned ? "aligned" : "unaligned"},
         {"layout_seed", env.layout_seed},
         {"correction", std::string(correction_name(env.correction))},
         {"exponent_check", env.exponent_check}};
  if (env.map_seed) j["map_seed"] = *env.map_seed;
  if (env.ber) j["ber"] = *env.ber;
  j["ber_override"] = per_type_to_json(env.ber_override);
  Json ch = Json::object();
  for (const auto& [id, c] : env.channels) {
    Json cj{{"model", model_to_json(c.model)}};
    if (c.bank) cj["bank"] = *c.bank;
    if (c.map_seed) cj["map_seed"] = *c.map_seed;
    ch[id.name()] = cj;
  }
  j["channels"] = ch;
  return j;
}

DramEnv env_from_json(const Json& j) {
  if (get<std::string>(j, "format") != "dramtol-env/1") {
    throw Error("schema", "not an environment");
  }
  DramEnv env;
  env.base_model = model_from_json(field(j, "base_model"));
  env.geometry = geometry_from_json(field(j, "geometry"));
  const auto layout = get<std::string>(j, "layout");
  if (layout != "aligned" && layout != "unaligned") throw Error("schema", "bad layout mode");
  env.layout = layout == "aligned" ? LayoutMode::aligned : LayoutMode::unaligned;
  env.layout_seed = get<std::uint64_t>(j, "layout_seed");
  env.correction = parse_correction(get<std::string>(j, "correction"));
  env.exponent_check = get<bool>(j, "exponent_check");
  if (j.contains("map_seed")) env.map_seed = get<std::uint64_t>(j, "map_seed");
  if (j.contains("ber")) env.ber = get<double>(j, "ber");
  if (j.contains("ber_override")) env.ber_override = per_type_from_json(j["ber_override"]);
  if (j.contains("channels")) {
    for (const auto& [k, v] : j["channels"].items()) {
      TypeChannel c;
      c.model = model_from_json(field(v, "model"));
      if (v.contains("bank")) c.bank = get<std::uint32_t>(v, "bank");
      if (v.contains("map_seed")) c.map_seed = get<std::uint64_t>(v, "map_seed");
      env.channels[DataTypeId::parse(k)] = c;
    }
  }
  env.validate();
  return env;
}

namespace {

std::filesystem::path sidecar(const std::filesystem::path& manifest, const std::string& tag) {
  auto p = manifest;
  p.replace_extension();
  return p.string() + "." + tag + ".ednt";
}

Tensor as_tensor(const std::vector<double>& v) {
  return Tensor::from_floats({v.size()}, std::vector<float>(v.begin(), v.end()));
}

std::vector<double> from_tensor(const Tensor& t, std::size_t expected) {
  if (t.dtype() != kFp32 || t.size() != expected) {
    throw Error("schema", "checkpoint tensor has the wrong size or type");
  }
  return {t.floats().begin(), t.floats().end()};
}

}  // namespace

void write_checkpoint(const std::filesystem::path& manifest, const Network& net,
                      const Thresholds& thresholds, const Json& extra) {
  Json layers = Json::array();
  for (const auto& l : net.layers) {
    layers.push_back({{"kind", std::string(layer_kind_name(l.kind))},
                      {"in", l.in},
                      {"out", l.out},
                      {"channels", l.channels},
                      {"height", l.height},
                      {"width", l.width},
                      {"kernel", l.kernel}});
  }
  Json tensors = Json::object();
  const auto p = net.parameterized_layers();
  for (std::uint32_t k = 0; k < p.size(); ++k) {
    const std::string id = DataTypeId{DataTypeId::Kind::weight, k}.name();
    const auto wpath = sidecar(manifest, id + ".w");
    const auto bpath = sidecar(manifest, id + ".b");
    const Tensor w = as_tensor(net.weights[p[k]]);
    const Tensor b = as_tensor(net.biases[p[k]]);
    write_tensor(wpath, w);
    write_tensor(bpath, b);
    tensors[id] = {{"weights", wpath.filename().string()},
                   {"bias", bpath.filename().string()},
                   {"weights_digest", hex64(fnv1a64(std::string_view(
                                          reinterpret_cast<const char*>(w.floats().data()),
                                          w.floats().size() * sizeof(float))))}};
  }
  Json j{{"format", "dramtol-model/1"},
         {"dtype", std::string(net.dtype.name())},
         {"layers", layers},
         {"tensors", tensors},
         {"thresholds", thresholds_to_json(thresholds)}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_json(manifest, j);
}

Checkpoint read_checkpoint(const std::filesystem::path& manifest) {
  Checkpoint c;
  c.manifest = read_json(manifest);
  const Json& j = c.manifest;
  if (get<std::string>(j, "format") != "dramtol-model/1") {
    throw Error("schema", "not a model checkpoint");
  }
  Network& net = c.net;
  net.dtype = Dtype::parse(get<std::string>(j, "dtype"));
  for (const auto& l : field(j, "layers")) {
    LayerSpec s;
    s.kind = parse_layer_kind(get<std::string>(l, "kind"));
    s.in = get<std::uint32_t>(l, "in");
    s.out = get<std::uint32_t>(l, "out");
    s.channels = get<std::uint32_t>(l, "channels");
    s.height = get<std::uint32_t>(l, "height");
    s.width = get<std::uint32_t>(l, "width");
    s.kernel = get<std::uint32_t>(l, "kernel");
    net.layers.push_back(s);
  }
  net.weights.resize(net.layers.size());
  net.biases.resize(net.layers.size());
  const Json& tensors = field(j, "tensors");
  const auto dir = manifest.parent_path();
  const auto p = net.parameterized_layers();
  for (std::uint32_t k = 0; k < p.size(); ++k) {
    const std::string id = DataTypeId{DataTypeId::Kind::weight, k}.name();
    const Json& t = field(tensors, id.c_str());
    const auto& layer = net.layers[p[k]];
    net.weights[p[k]] = from_tensor(read_tensor(dir / get<std::string>(t, "weights")),
                                    layer.weight_count());
    net.biases[p[k]] = from_tensor(read_tensor(dir / get<std::string>(t, "bias")),
                                   layer.bias_count());
  }
  net.validate();
  c.thresholds = thresholds_from_json(field(j, "thresholds"));
  return c;
}

std::string flip_trace_to_jsonl(const FlipTrace& t) {
  std::string out;
  for (const auto& r : t.records) {
    out += Json{{"bank", r.bank},
                {"row", r.row},
                {"bit", r.bit},
                {"dir", r.direction == FlipDirection::zero_to_one ? "0to1" : "1to0"}}
               .dump();
    out += '\n';
  }
  Json overflow = Json::array();
  for (const auto& [key, n] : t.overflow_row_counts) {
    overflow.push_back({{"bank", key.first}, {"row", key.second}, {"flips", n}});
  }
  out += Json{{"summary", true},
              {"total_flips", t.total_flips},
              {"truncated", t.truncated},
              {"overflow_rows", overflow}}
             .dump();
  out += '\n';
  return out;
}

std::vector<std::uint8_t> serialize_error_trace(const ErrorTrace& t) {
  t.validate();
  ByteWriter w;
  w.raw("EDTR", 4);
  w.u8(1);
  w.u32(t.geometry.banks);
  w.u32(t.geometry.rows_per_bank);
  w.u32(t.geometry.bits_per_row);
  w.f64(t.op.delta_vdd);
  w.f64(t.op.delta_trcd);
  w.u32(t.rounds);
  w.u64(t.cells());
  for (std::size_t i = 0; i < t.cells(); ++i) {
    w.u16(t.zero_reads[i]);
    w.u16(t.one_reads[i]);
    w.u16(t.zero_flips[i]);
    w.u16(t.one_flips[i]);
  }
  return std::move(w.bytes());
}

ErrorTrace deserialize_error_trace(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  char magic[4];
  if (bytes.size() < 37) throw Error("bad_trace", "error trace file is truncated");
  r.raw(magic, 4);
  if (std::string_view(magic, 4) != "EDTR") throw Error("bad_trace", "not an error trace file");
  if (r.u8() != 1) throw Error("bad_trace", "unsupported error trace version");
  ErrorTrace t;
  t.geometry.banks = r.u32();
  t.geometry.rows_per_bank = r.u32();
  t.geometry.bits_per_row = r.u32();
  t.op.delta_vdd = r.f64();
  t.op.delta_trcd = r.f64();
  t.rounds = r.u32();
  const std::uint64_t cells = r.u64();
  if (r.remaining() != cells * 8) throw Error("bad_trace", "error trace size mismatch");
  t.zero_reads.resize(cells);
  t.one_reads.resize(cells);
  t.zero_flips.resize(cells);
  t.one_flips.resize(cells);
  for (std::uint64_t i = 0; i < cells; ++i) {
    t.zero_reads[i] = r.u16();
    t.one_reads[i] = r.u16();
    t.zero_flips[i] = r.u16();
    t.one_flips[i] = r.u16();
  }
  t.validate();
  return t;
}

void write_error_trace(const std::filesystem::path& path, const ErrorTrace& t) {
  write_file_bytes(path, serialize_error_trace(t));
}

ErrorTrace read_error_trace(const std::filesystem::path& path) {
  return deserialize_error_trace(read_file_bytes(path));
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("schema", path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("io", "failed writing " + path.string());
}

std::string json_digest(const Json& j) { return hex64(fnv1a64(j.dump())); }

}  // namespace dramtol
