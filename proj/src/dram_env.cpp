// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/dram_env.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dramtol/error.hpp"
#include "dramtol/rng.hpp"

namespace dramtol {

ErrorModel DramEnv::model_for(const DataTypeId& id) const {
  if (const auto it = channels.find(id); it != channels.end()) return it->second.model;
  std::optional<double> target = ber;
  if (const auto it = ber_override.find(id); it != ber_override.end()) target = it->second;
  if (!target) return base_model;
  if (*target == 0.0) return UniformModel{};
  return scale_to_ber(base_model, *target);
}

void DramEnv::validate() const {
  geometry.validate();
  validate_model(base_model, geometry);
  auto check = [](double b, const std::string& what) {
    if (!(b >= 0.0 && b <= 0.5)) {
      throw Error("bad_env", what + " BER " + std::to_string(b) + " outside [0, 0.5]");
    }
  };
  if (ber) check(*ber, "global");
  for (const auto& [id, b] : ber_override) check(b, id.name());
  for (const auto& [id, ch] : channels) {
    validate_model(ch.model, geometry);
    if (ch.bank && *ch.bank >= geometry.banks) {
      throw Error("bad_env", id.name() + " is placed in a bank outside the geometry");
    }
  }
}

CompiledEnv::CompiledEnv(const DramEnv& env, const Network& net, const Thresholds& thresholds,
                         std::size_t batch_capacity, std::uint64_t trial_seed)
    : dtype_(net.dtype),
      correction_(env.correction),
      exponent_check_(env.exponent_check && !net.dtype.is_integer()),
      trial_seed_(trial_seed) {
  env.validate();
  const auto types = net.data_types();
  const auto bits = static_cast<std::uint64_t>(net.dtype.bits());

  // Active types grouped by placement region; key -1 is the whole device.
  std::map<std::int64_t, std::vector<LayoutRequest>> groups;
  for (std::size_t k = 0; k < types.size(); ++k) {
    const auto& id = types[k];
    Channel ch;
    ch.model = env.model_for(id);
    ch.index = k;
    ch.active = expected_ber(ch.model) > 0.0;
    if (thresholds.has(id)) {
      ch.bounds = thresholds.bounds(id);
    } else {
      ch.bounds = {-std::numeric_limits<double>::infinity(),
                   std::numeric_limits<double>::infinity()};
    }
    if (ch.active) {
      std::uint64_t n = net.elements(id);
      if (id.kind == DataTypeId::Kind::ifm) n *= batch_capacity;
      std::int64_t key = -1;
      if (const auto it = env.channels.find(id); it != env.channels.end() && it->second.bank) {
        key = *it->second.bank;
      }
      groups[key].push_back({id.name(), n * bits});
    }
    channels_.emplace(id, std::move(ch));
    stats_[id] = {};
  }
  if (groups.count(-1) != 0 && groups.size() > 1) {
    throw Error("bad_env", "bank-bound and unbound data types cannot be mixed");
  }

  for (const auto& [key, requests] : groups) {
    LayoutRegion region;
    if (key >= 0) {
      region.bank_begin = static_cast<std::uint32_t>(key);
      region.bank_end = static_cast<std::uint32_t>(key) + 1;
    }
    auto part = plan_layout(env.geometry, requests, env.layout,
                            derive_seed(env.layout_seed, static_cast<std::uint64_t>(key + 1)),
                            region);
    for (auto& p : part.placements) layout_.placements.push_back(std::move(p));
  }
  layout_.mode = env.layout;

  const std::uint64_t fresh_map = derive_seed(trial_seed, "weak-map");
  for (auto& [id, ch] : channels_) {
    if (!ch.active) continue;
    ch.placement = layout_.find(id.name());
    std::uint64_t map_seed = env.map_seed.value_or(fresh_map);
    if (const auto it = env.channels.find(id); it != env.channels.end() && it->second.map_seed) {
      map_seed = *it->second.map_seed;
    }
    const CellRange range = ch.placement.cells(env.geometry);
    ch.map = WeakCellMap::generate(ch.model, env.geometry, map_seed,
                                   std::span<const CellRange>(&range, 1));
  }
}

double CompiledEnv::ber(const DataTypeId& id) const {
  const auto it = channels_.find(id);
  if (it == channels_.end() || !it->second.active) return 0.0;
  return expected_ber(it->second.model);
}

void CompiledEnv::load(const DataTypeId& id, std::span<double> values, std::uint64_t access) {
  const auto it = channels_.find(id);
  if (it == channels_.end()) {
    throw Error("bad_data_type", "environment has no data type " + id.name());
  }
  Channel& ch = it->second;
  auto& st = stats_[id];
  ++st.loads;
  if (!ch.active) {
    storage_round(dtype_, values);
    return;
  }
  const std::size_t n = values.size();
  Tensor t = Tensor::from_floats({n}, std::vector<float>(values.begin(), values.end()));
  if (dtype_.is_integer()) t = quantize(t, dtype_);
  BitImage img = encode_bits(t);
  Placement p = ch.placement;
  if (img.size_bits() > p.length_bits) {
    throw Error("layout_overflow", id.name() + " load exceeds its reserved space");
  }
  p.length_bits = img.size_bits();
  const std::uint64_t seed = derive_seed(derive_seed(trial_seed_, access), ch.index);
  st.flips += inject_in_place(img, p, ch.map, ch.model, seed);
  st.bits += img.size_bits();
  const Tensor d = decode_bits(img, dtype_, {n}, t.scale());
  for (std::size_t i = 0; i < n; ++i) {
    const double v = d.real(i);
    double c = v;
    if (correction_ != Correction::off) {
      if (exponent_check_) {
        if (exponent_out_of_range(d.floats()[i], ch.bounds)) {
          c = bound_correct(v, ch.bounds, correction_);
        }
      } else {
        c = bound_correct(v, ch.bounds, correction_);
      }
    }
    // NaN compares unequal to itself; count it as corrected when replaced.
    if (c != v && !(std::isnan(c) && std::isnan(v))) ++st.corrected;
    values[i] = c;
  }
}

LoadFn CompiledEnv::loader(std::uint64_t access) {
  return [this, access](const DataTypeId& id, std::span<double> values) {
    load(id, values, access);
  };
}

}  // namespace dramtol
