// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dramtol/characterize.hpp"
#include "dramtol/dataset.hpp"
#include "dramtol/device_sim.hpp"
#include "dramtol/dram_env.hpp"
#include "dramtol/dram_model.hpp"
#include "dramtol/mapping.hpp"
#include "dramtol/model_fit.hpp"
#include "dramtol/network.hpp"

namespace dramtol {

using Json = nlohmann::json;

inline constexpr const char* kFamilyNames[] = {"uniform", "bitline", "wordline",
                                               "data_dependent"};

/// "uniform" / "bitline" / "wordline" / "data_dependent" or "0".."3".
int parse_family(const std::string& name);

/// {"family": 0..3, "name": ..., "params": {...}}. Readers also accept the
/// family name and ignore extra keys such as "geometry" and "seed".
Json model_to_json(const ErrorModel& m);
/// Throws `Error("schema")` on missing or mistyped fields.
ErrorModel model_from_json(const Json& j);

Json op_to_json(const OperatingPoint& op);
OperatingPoint op_from_json(const Json& j);

Json geometry_to_json(const DramGeometry& g);
DramGeometry geometry_from_json(const Json& j);

/// Device profile. Hidden models are stored under "hidden" with
/// "opaque": true; only the simulator reads them back.
struct DeviceCodec {
  static Json to_json(const GroundTruthDevice& dev);
  static GroundTruthDevice from_json(const Json& j);
};

Json fit_report_to_json(const std::vector<FitResult>& fits, const ModelSelection& sel);
/// The selected model of a fit report.
ErrorModel selected_model_from_report(const Json& j);

Json characterization_to_json(const CharacterizationResult& r);
CharacterizationResult characterization_from_json(const Json& j);

Json plan_to_json(const MappingPlan& plan);
MappingPlan plan_from_json(const Json& j);

Json dataset_to_json(const Dataset& d);
/// Regenerates the dataset from its recipe and checks the digest.
Dataset dataset_from_json(const Json& j);
std::string dataset_digest(const Dataset& d);

Json thresholds_to_json(const Thresholds& t);
Thresholds thresholds_from_json(const Json& j);

Json env_to_json(const DramEnv& env);
DramEnv env_from_json(const Json& j);

/// Checkpoint: a JSON manifest with the topology, dtype and thresholds next
/// to one EDNT file per parameter tensor ("<stem>.<dtype id>.w.ednt" and
/// ".b.ednt"), stored as fp32.
void write_checkpoint(const std::filesystem::path& manifest, const Network& net,
                      const Thresholds& thresholds, const Json& extra = Json::object());
struct Checkpoint {
  Network net;
  Thresholds thresholds;
  Json manifest;
};
Checkpoint read_checkpoint(const std::filesystem::path& manifest);

/// One JSON object per line: {"bank", "row", "bit", "dir"}; a final summary
/// line carries the totals and overflow counts.
std::string flip_trace_to_jsonl(const FlipTrace& t);

// "EDTR" error trace files, little-endian:
//   "EDTR" | u8 version=1 | u32 banks | u32 rows | u32 bits | f64 dvdd |
//   f64 dtrcd | u32 rounds | u64 cells | cells x (u16 zero_reads,
//   u16 one_reads, u16 zero_flips, u16 one_flips)
std::vector<std::uint8_t> serialize_error_trace(const ErrorTrace& t);
ErrorTrace deserialize_error_trace(const std::vector<std::uint8_t>& bytes);
void write_error_trace(const std::filesystem::path& path, const ErrorTrace& t);
ErrorTrace read_error_trace(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

/// FNV-1a of the compact dump, as 16 hex digits.
std::string json_digest(const Json& j);

}  // namespace dramtol
