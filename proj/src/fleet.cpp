// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "edgeshard/errors.hpp"

namespace edgeshard {

void TailModel::validate() const {
  switch (kind) {
    case Kind::deterministic:
      if (!(value >= 0)) throw ConfigError("latency.value", "constant latency must be >= 0");
      break;
    case Kind::exponential:
      if (!(value > 0)) throw ConfigError("latency.rate", "must be > 0");
      break;
    case Kind::pareto:
      if (!(value > 0)) throw ConfigError("latency.x_m", "must be > 0");
      if (!(alpha > 0)) throw ConfigError("latency.alpha", "must be > 0");
      break;
  }
}

bool TailModel::has_finite_mean() const { return kind != Kind::pareto || alpha > 1; }

double TailModel::mean() const {
  switch (kind) {
    case Kind::deterministic: return value;
    case Kind::exponential: return 1.0 / value;
    case Kind::pareto:
      return alpha > 1 ? value * alpha / (alpha - 1) : std::numeric_limits<double>::infinity();
  }
  return 0;
}

double sample_latency(const TailModel& model, Rng& rng) {
  switch (model.kind) {
    case TailModel::Kind::deterministic: return model.value;
    case TailModel::Kind::exponential: return -std::log1p(-uniform01(rng)) / model.value;
    case TailModel::Kind::pareto:
      // Inverse CDF of P(L > x) = (x_m/x)^alpha.
      return model.value * std::pow(1.0 - uniform01(rng), -1.0 / model.alpha);
  }
  return 0;
}

void DeviceSpec::validate() const {
  const std::string prefix = fmt::format("device[{}].", id);
  if (!(flops > 0)) throw ConfigError(prefix + "flops", "must be > 0");
  if (!(ul_bw > 0)) throw ConfigError(prefix + "ul_bw", "must be > 0");
  if (!(dl_bw > 0)) throw ConfigError(prefix + "dl_bw", "must be > 0");
  if (!(mem_capacity > 0)) throw ConfigError(prefix + "mem_capacity", "must be > 0");
  if (!(ul_overhead >= 0)) throw ConfigError(prefix + "ul_overhead", "must be >= 0");
  if (!(dl_overhead >= 0)) throw ConfigError(prefix + "dl_overhead", "must be >= 0");
  latency.validate();
}

void FleetSpec::validate() const {
  if (devices.empty()) throw ConfigError("fleet.devices", "fleet must contain at least one device");
  std::set<DeviceId> seen;
  for (const auto& d : devices) {
    d.validate();
    if (!seen.insert(d.id).second) throw ConfigError("fleet.devices", fmt::format("duplicate device id {}", d.id));
  }
  if (!(ps.aggregate_bw > 0)) throw ConfigError("fleet.ps.aggregate_bw", "must be > 0");
  if (!(ps.update_flops > 0)) throw ConfigError("fleet.ps.update_flops", "must be > 0");
}

std::size_t FleetSpec::index_of(DeviceId id) const {
  // Sampled fleets use ids 0..D-1 in order.
  if (id < devices.size() && devices[id].id == id) return id;
  for (std::size_t i = 0; i < devices.size(); ++i)
    if (devices[i].id == id) return i;
  return npos;
}

HeterogeneityProfile HeterogeneityProfile::homogeneous(double flops, double dl_bw, double ul_bw,
                                                       double mem, double overhead) {
  HeterogeneityProfile p;
  p.phone_fraction = 0;
  p.laptop_flops_min = p.laptop_flops_max = flops;
  p.laptop_mem = mem;
  p.dl_min = p.dl_max = dl_bw;
  p.ul_min = p.ul_max = ul_bw;
  p.ul_overhead = p.dl_overhead = overhead;
  return p;
}

FleetSpec sample_fleet(const HeterogeneityProfile& profile, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ConfigError("fleet.count", "must be >= 1");
  Rng rng(seed);
  FleetSpec fleet;
  fleet.ps = profile.ps;
  fleet.devices.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    DeviceSpec d;
    d.id = static_cast<DeviceId>(i);
    // Always draw the same number of variates per device so fleets of
    // different sizes share a prefix.
    const double kind_u = uniform01(rng);
    const double flops_u = uniform01(rng);
    const double dl_u = uniform01(rng);
    const double ul_u = uniform01(rng);
    const bool phone = kind_u < profile.phone_fraction;
    if (phone) {
      d.flops = profile.phone_flops_min + (profile.phone_flops_max - profile.phone_flops_min) * flops_u;
      d.mem_capacity = profile.phone_mem;
    } else {
      d.flops = profile.laptop_flops_min + (profile.laptop_flops_max - profile.laptop_flops_min) * flops_u;
      d.mem_capacity = profile.laptop_mem;
    }
    d.dl_bw = profile.dl_min + (profile.dl_max - profile.dl_min) * dl_u;
    d.ul_bw = profile.ul_min + (profile.ul_max - profile.ul_min) * ul_u;
    d.ul_overhead = profile.ul_overhead;
    d.dl_overhead = profile.dl_overhead;
    d.latency = profile.latency;
    fleet.devices.push_back(d);
  }
  fleet.validate();
  return fleet;
}

std::vector<DeviceId> straggler_ids(const FleetSpec& fleet, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0 && fraction <= 1)) throw ConfigError("stragglers.fraction", "must lie in [0, 1]");
  const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(fleet.size()) + 1e-9));
  std::vector<DeviceId> ids;
  for (const auto& d : fleet.devices) ids.push_back(d.id);
  Rng rng(derive_seed(seed, 0x5752));
  // Fisher-Yates with our own uniform draw for portability.
  for (std::size_t i = ids.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(ids[i - 1], ids[std::min(j, i - 1)]);
  }
  ids.resize(n);
  std::sort(ids.begin(), ids.end());
  return ids;
}

FleetSpec inject_stragglers(const FleetSpec& fleet, double fraction, double slowdown,
                            std::uint64_t seed) {
  if (!(slowdown >= 1)) throw ConfigError("stragglers.slowdown", "must be >= 1");
  FleetSpec out = fleet;
  for (DeviceId id : straggler_ids(fleet, fraction, seed)) {
    auto& d = out.devices[out.index_of(id)];
    d.flops /= slowdown;
    d.ul_bw /= slowdown;
    d.dl_bw /= slowdown;
  }
  return out;
}

std::vector<double> effective_dl_bandwidth(const FleetSpec& fleet) {
  const std::size_t n = fleet.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fleet.devices[a].dl_bw < fleet.devices[b].dl_bw;
  });
  std::vector<double> rate(n, 0);
  double remaining = fleet.ps.aggregate_bw;
  for (std::size_t i = 0; i < n; ++i) {
    const double share = remaining / static_cast<double>(n - i);
    const double want = fleet.devices[order[i]].dl_bw;
    rate[order[i]] = std::min(want, share);
    remaining -= rate[order[i]];
  }
  return rate;
}

void ChurnTrace::validate(const FleetSpec& fleet) const {
  std::set<DeviceId> live;
  std::set<DeviceId> ever;
  for (const auto& d : fleet.devices) {
    live.insert(d.id);
    ever.insert(d.id);
  }
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& e : events) {
    if (!(e.time >= 0)) throw ConfigError("churn.time", "event times must be >= 0");
    if (e.time < last) throw ConfigError("churn.time", "event times must be nondecreasing");
    last = e.time;
    if (e.kind == ChurnEvent::Kind::fail) {
      if (!live.erase(e.device_id)) {
        throw ConfigError("churn.device_id", fmt::format("fail event targets device {} which is not live", e.device_id));
      }
    } else {
      if (!ever.insert(e.device_id).second) {
        throw ConfigError("churn.device_id", fmt::format("join event reuses device id {}", e.device_id));
      }
      e.joined.validate();
      live.insert(e.device_id);
    }
  }
}

ChurnTrace parse_churn_trace(const std::string& text, const DeviceSpec& join_template) {
  ChurnTrace trace;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string time_s, id_s, kind_s;
    if (!(fields >> time_s)) continue;
    const std::string where = fmt::format("churn line {}", lineno);
    if (!(fields >> id_s >> kind_s)) throw ConfigError(where, "expected `time device_id fail|join`");
    ChurnEvent e;
    try {
      e.time = std::stod(time_s);
      e.device_id = static_cast<DeviceId>(std::stoul(id_s));
    } catch (const std::exception&) {
      throw ConfigError(where, "malformed time or device id");
    }
    if (kind_s == "fail") {
      e.kind = ChurnEvent::Kind::fail;
    } else if (kind_s == "join") {
      e.kind = ChurnEvent::Kind::join;
      e.joined = join_template;
      e.joined.id = e.device_id;
      std::string kv;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError(where, "expected key=value, got " + kv);
        const std::string key = kv.substr(0, eq);
        double v = 0;
        try {
          v = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
          throw ConfigError(where, "malformed value for " + key);
        }
        if (key == "flops") e.joined.flops = v;
        else if (key == "ul_bw") e.joined.ul_bw = v;
        else if (key == "dl_bw") e.joined.dl_bw = v;
        else if (key == "ul_overhead") e.joined.ul_overhead = v;
        else if (key == "dl_overhead") e.joined.dl_overhead = v;
        else if (key == "mem") e.joined.mem_capacity = v;
        else throw ConfigError(where, "unknown join key " + key);
      }
    } else {
      throw ConfigError(where, "event kind must be fail or join, got " + kind_s);
    }
    trace.events.push_back(e);
  }
  return trace;
}

ChurnTrace load_churn_trace(const std::string& path, const DeviceSpec& join_template) {
  std::ifstream in(path);
  if (!in) throw ConfigError("churn.path", "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_churn_trace(buf.str(), join_template);
}

}  // namespace edgeshard
