// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "dramtol/error.hpp"
#include "dramtol/rng.hpp"

namespace dramtol {

namespace {

constexpr double kBerSlack = 1e-12;

bool within(double ber, double tolerance) { return ber <= tolerance + kBerSlack; }

}  // namespace

double aggressiveness(const OperatingPoint& op) {
  return std::abs(op.delta_vdd) / 0.35 + std::abs(op.delta_trcd) / 6.0;
}

bool more_aggressive(const OperatingPoint& a, const OperatingPoint& b) {
  const double sa = aggressiveness(a), sb = aggressiveness(b);
  if (sa != sb) return sa > sb;
  return std::abs(a.delta_vdd) > std::abs(b.delta_vdd);
}

std::vector<OperatingPoint> operating_lattice() {
  std::vector<OperatingPoint> pts;
  for (int v = 0; v <= 7; ++v) {
    for (int t = 0; t <= 12; ++t) pts.push_back({-v * 5 / 100.0, -t * 5 / 10.0});
  }
  return pts;
}

OperatingPoint coarse_map(double tolerable_ber, const GroundTruthDevice& dev) {
  if (!(tolerable_ber >= 0.0)) throw Error("bad_ber", "tolerable BER must be >= 0");
  OperatingPoint best;
  if (tolerable_ber == 0.0) return best;
  for (const auto& op : operating_lattice()) {
    if (within(dev.aggregate_ber(op), tolerable_ber) && more_aggressive(op, best)) best = op;
  }
  return best;
}

const CatalogEntry* PartitionCatalog::find(PartitionId id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

void PartitionCatalog::validate() const {
  std::set<PartitionId> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.id).second) {
      throw Error("bad_catalog", "duplicate partition " + std::to_string(e.id));
    }
    if (e.capacity_bytes == 0) {
      throw Error("bad_catalog", "partition " + std::to_string(e.id) + " has no capacity");
    }
    for (std::size_t i = 1; i < e.points.size(); ++i) {
      if (!more_aggressive(e.points[i].op, e.points[i - 1].op) ||
          e.points[i].ber < e.points[i - 1].ber) {
        throw Error("bad_catalog", "partition " + std::to_string(e.id) +
                                       " points are not ordered by aggressiveness and BER");
      }
    }
  }
}

PartitionCatalog build_catalog(const GroundTruthDevice& dev) {
  auto lattice = operating_lattice();
  std::sort(lattice.begin(), lattice.end(),
            [](const auto& a, const auto& b) { return more_aggressive(a, b); });
  PartitionCatalog cat;
  for (const auto& part : dev.partitions()) {
    CatalogEntry e;
    e.id = part.id;
    e.capacity_bytes = part.capacity_bytes;
    double floor = std::numeric_limits<double>::infinity();
    for (const auto& op : lattice) {
      const double b = dev.ber_curve(part.id, op);
      if (b < floor) {
        e.points.push_back({op, b});
        floor = b;
      }
    }
    std::reverse(e.points.begin(), e.points.end());
    cat.entries.push_back(std::move(e));
  }
  return cat;
}

std::string catalog_digest(const PartitionCatalog& catalog) {
  std::string text;
  char buf[96];
  for (const auto& e : catalog.entries) {
    std::snprintf(buf, sizeof buf, "P%u:%llu\n", e.id,
                  static_cast<unsigned long long>(e.capacity_bytes));
    text += buf;
    for (const auto& p : e.points) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.op.delta_vdd, p.op.delta_trcd,
                    p.ber);
      text += buf;
    }
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

MappingPlan fine_map(const std::map<std::string, double>& tolerance,
                     const std::map<std::string, std::uint64_t>& sizes,
                     const PartitionCatalog& catalog) {
  catalog.validate();
  MappingPlan plan;
  plan.mode = "fine";
  plan.tolerance = tolerance;
  plan.sizes = sizes;
  plan.catalog_digest = catalog_digest(catalog);
  for (const auto& [name, tol] : tolerance) {
    if (!sizes.contains(name)) throw Error("bad_sizes", "no size for data type " + name);
    if (!(tol >= 0.0)) throw Error("bad_ber", "tolerance of " + name + " must be >= 0");
  }
  if (catalog.entries.empty()) plan.warnings.push_back("empty catalog; all data spilled");

  std::vector<std::pair<double, std::string>> order;
  for (const auto& [name, tol] : tolerance) order.emplace_back(tol, name);
  std::sort(order.begin(), order.end());

  std::map<PartitionId, std::uint64_t> remaining;
  for (const auto& e : catalog.entries) remaining[e.id] = e.capacity_bytes;

  for (const auto& [tol, name] : order) {
    const std::uint64_t size = sizes.at(name);
    const CatalogEntry* chosen = nullptr;
    const CatalogPoint* chosen_point = nullptr;
    for (const auto& e : catalog.entries) {
      if (remaining[e.id] < size) continue;
      const CatalogPoint* best = nullptr;
      for (const auto& p : e.points) {
        if (p.ber <= tol) best = &p;
      }
      if (best == nullptr) continue;
      const bool better =
          chosen_point == nullptr || more_aggressive(best->op, chosen_point->op) ||
          (best->op == chosen_point->op && e.id < chosen->id);
      if (better) {
        chosen = &e;
        chosen_point = best;
      }
    }
    if (chosen == nullptr) {
      plan.spill.push_back(name);
      continue;
    }
    remaining[chosen->id] -= size;
    plan.assignments[name] = {chosen->id, chosen_point->op, chosen_point->ber};
  }
  std::sort(plan.spill.begin(), plan.spill.end());
  return plan;
}

MappingPlan fine_map(const CharacterizationResult& ch,
                     const std::map<std::string, std::uint64_t>& sizes,
                     const PartitionCatalog& catalog) {
  if (ch.mode != "fine" || ch.per_type.empty()) {
    throw Error("not_fine", "fine mapping needs a fine characterization");
  }
  std::map<std::string, double> tol;
  for (const auto& [id, b] : ch.per_type) tol[id.name()] = b;
  return fine_map(tol, sizes, catalog);
}

MappingPlan coarse_plan(double tolerable_ber, const GroundTruthDevice& dev,
                        const std::map<std::string, std::uint64_t>& sizes) {
  MappingPlan plan;
  plan.mode = "coarse";
  plan.coarse_tolerable_ber = tolerable_ber;
  plan.coarse_point = coarse_map(tolerable_ber, dev);
  plan.sizes = sizes;
  plan.catalog_digest = catalog_digest(build_catalog(dev));
  std::map<PartitionId, std::uint64_t> remaining;
  for (const auto& p : dev.partitions()) remaining[p.id] = p.capacity_bytes;
  for (const auto& [name, size] : sizes) {
    bool placed = false;
    for (const auto& p : dev.partitions()) {
      if (remaining[p.id] < size) continue;
      remaining[p.id] -= size;
      plan.assignments[name] = {p.id, plan.coarse_point, dev.ber_curve(p.id, plan.coarse_point)};
      placed = true;
      break;
    }
    if (!placed) plan.spill.push_back(name);
  }
  return plan;
}

std::vector<std::string> plan_violations(const MappingPlan& plan,
                                         const PartitionCatalog& catalog) {
  std::vector<std::string> v;
  if (plan.mode != "fine") return v;
  std::map<std::string, int> seen;
  for (const auto& [name, a] : plan.assignments) ++seen[name];
  for (const auto& name : plan.spill) ++seen[name];
  for (const auto& [name, tol] : plan.tolerance) {
    if (seen[name] != 1) {
      v.push_back(name + " appears " + std::to_string(seen[name]) + " times");
    }
  }
  for (const auto& [name, count] : seen) {
    if (!plan.tolerance.contains(name)) v.push_back(name + " is not a characterized data type");
  }
  std::map<PartitionId, std::uint64_t> used;
  for (const auto& [name, a] : plan.assignments) {
    const CatalogEntry* e = catalog.find(a.partition);
    if (e == nullptr) {
      v.push_back(name + " is assigned to unknown partition " + std::to_string(a.partition));
      continue;
    }
    const auto it = std::find_if(e->points.begin(), e->points.end(),
                                 [&](const CatalogPoint& p) { return p.op == a.op; });
    if (it == e->points.end()) {
      v.push_back(name + " uses an operating point outside the catalog");
    } else if (it->ber != a.ber) {
      v.push_back(name + " records a BER that differs from the catalog");
    }
    if (const auto t = plan.tolerance.find(name); t != plan.tolerance.end() && a.ber > t->second) {
      v.push_back(name + " is assigned above its tolerable BER");
    }
    if (const auto s = plan.sizes.find(name); s != plan.sizes.end()) {
      used[a.partition] += s->second;
    } else {
      v.push_back(name + " has no recorded size");
    }
  }
  for (const auto& [id, bytes] : used) {
    if (const CatalogEntry* e = catalog.find(id); e != nullptr && bytes > e->capacity_bytes) {
      v.push_back("partition " + std::to_string(id) + " is over capacity");
    }
  }
  return v;
}

std::map<std::string, std::uint64_t> data_type_sizes(const Network& net,
                                                     std::size_t batch_capacity) {
  std::map<std::string, std::uint64_t> sizes;
  const auto bits = static_cast<std::uint64_t>(net.dtype.bits());
  for (const auto& id : net.data_types()) {
    std::uint64_t n = net.elements(id);
    if (id.kind == DataTypeId::Kind::ifm) n *= batch_capacity;
    sizes[id.name()] = (n * bits + 7) / 8;
  }
  return sizes;
}

DramEnv apply_plan(const MappingPlan& plan, const Network& net, const GroundTruthDevice& dev,
                   const DramEnv& base) {
  DramEnv env = base;
  env.geometry = dev.geometry();
  env.ber.reset();
  env.ber_override.clear();
  env.channels.clear();
  env.map_seed.reset();

  auto channel = [&](PartitionId pid, const OperatingPoint& op) {
    bool known = false;
    for (const auto& p : dev.partitions()) known = known || p.id == pid;
    if (!known) throw Error("unknown_partition", "plan uses unknown partition " + std::to_string(pid));
    TypeChannel ch;
    ch.model = dev.model_at(pid, op);
    ch.bank = dev.partition(pid).bank;
    ch.map_seed = dev.weak_map_seed(pid);
    return ch;
  };

  for (const auto& id : net.data_types()) {
    const auto it = plan.assignments.find(id.name());
    if (it == plan.assignments.end()) {
      env.channels[id] = TypeChannel{};
    } else {
      env.channels[id] = channel(it->second.partition, it->second.op);
    }
  }
  return env;
}

}  // namespace dramtol
