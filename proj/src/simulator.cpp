// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include <fmt/format.h>

#include "edgeshard/errors.hpp"
#include "edgeshard/rng.hpp"

namespace edgeshard {

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::no_tp: return "no_tp";
    case Ablation::no_ps: return "no_ps";
    case Ablation::no_heterogeneity: return "no_heterogeneity";
  }
  return "?";
}

Ablation parse_ablation(const std::string& s) {
  if (s == "no_tp") return Ablation::no_tp;
  if (s == "no_ps") return Ablation::no_ps;
  if (s == "no_heterogeneity") return Ablation::no_heterogeneity;
  throw ConfigError("sim.ablation", fmt::format("unknown ablation '{}'", s));
}

void SimConfig::validate(const FleetSpec& fleet) const {
  if (parameter_count < 0) throw ConfigError("sim.parameter_count", "must be >= 0");
  if (update_flops_per_param < 0) throw ConfigError("sim.update_flops_per_param", "must be >= 0");
  if (latency_mode == LatencyMode::stochastic) {
    for (const auto& d : fleet.devices) d.latency.validate();
  }
  churn.validate(fleet);
}

const DeviceStats* SimResult::stats(DeviceId id) const {
  for (const auto& s : per_device)
    if (s.device == id) return &s;
  return nullptr;
}

double SimResult::max_peak_mem() const {
  double m = 0;
  for (const auto& s : per_device) m = std::max(m, s.peak_mem);
  return m;
}

double SimResult::max_ul_volume() const {
  double m = 0;
  for (const auto& s : per_device) m = std::max(m, s.ul_volume);
  return m;
}

double pipeline_time(double t_dl, double t_comp, double t_ul, std::uint64_t k) {
  if (k == 0) throw ConfigError("pipeline.k", "pair count must be >= 1");
  if (t_dl < 0 || t_comp < 0 || t_ul < 0) throw ConfigError("pipeline", "stage times must be >= 0");
  return t_dl + static_cast<double>(k - 1) * std::max({t_dl, t_comp, t_ul}) + t_comp + t_ul;
}

namespace {

bool is_backward(const LevelPlan& lp) {
  for (const auto& u : lp.units)
    if (u.kind.find('.') != std::string::npos) return true;
  return false;
}

std::uint64_t block_pairs(const TilingGrid& g, const Rect& r) {
  const std::uint64_t rb = (r.alpha() + g.row_block - 1) / g.row_block;
  const std::uint64_t cb = (r.beta() + g.col_block - 1) / g.col_block;
  return rb * cb;
}

struct DeviceRun {
  DeviceId id = 0;
  RawCost raw;
  std::uint64_t pairs = 0;
  double time = 0;
};

class Engine {
 public:
  Engine(const SchedulePlan& plan, const FleetSpec& fleet, const SimConfig& sim)
      : plan_(plan), sim_(sim), live_(fleet) {
    for (const auto& d : fleet.devices) stats_index(d.id);
  }

  SimResult run(const ChurnTrace& churn) {
    std::vector<ChurnEvent> events = churn.events;
    std::stable_sort(events.begin(), events.end(),
                     [](const ChurnEvent& a, const ChurnEvent& b) { return a.time < b.time; });
    std::size_t next_event = 0;
    std::vector<DeviceSpec> pending_joins;
    bool changed = false;  // live set differs from the planning fleet
    double t = 0, backward = 0;

    for (std::size_t s = 0; s < plan_.levels.size(); ++s) {
      if (!pending_joins.empty()) {
        for (auto& d : pending_joins) {
          live_.devices.push_back(d);
          stats_index(d.id);
        }
        pending_joins.clear();
        changed = true;
      }
      const auto lp = changed ? replan(plan_.levels[s]) : plan_.levels[s];
      auto runs = execute(*lp, s);

      double slowest = 0, mean = 0;
      for (const auto& r : runs) {
        slowest = std::max(slowest, r.time);
        mean += r.time;
      }
      if (!runs.empty()) mean /= static_cast<double>(runs.size());
      result_.barrier_waits.push_back(slowest - mean);

      // Churn inside this level.
      double level_end = t + slowest;
      std::vector<DeviceId> failed_here;
      while (next_event < events.size() && events[next_event].time < level_end) {
        const ChurnEvent& e = events[next_event++];
        if (e.kind == ChurnEvent::Kind::join) {
          DeviceSpec d = e.joined;
          d.id = e.device_id;
          pending_joins.push_back(d);
          continue;
        }
        level_end = fail(*lp, runs, failed_here, e, s, t, level_end);
        changed = true;
      }
      for (DeviceId id : failed_here) std::erase_if(live_.devices, [&](const DeviceSpec& d) { return d.id == id; });
      if (live_.devices.empty() && s + 1 < plan_.levels.size()) {
        throw InfeasibleError("every device has failed", s);
      }

      const double dt = level_end - t;
      result_.level_times.push_back(dt);
      if (is_backward(*lp)) backward += dt;
      t = level_end;
      // Events between levels apply before the next level starts.
      while (next_event < events.size() && events[next_event].time <= t &&
             events[next_event].kind == ChurnEvent::Kind::join) {
        const ChurnEvent& e = events[next_event++];
        DeviceSpec d = e.joined;
        d.id = e.device_id;
        pending_joins.push_back(d);
      }
    }

    const double update = sim_.parameter_count * sim_.update_flops_per_param / live_.ps.update_flops;
    result_.ps_update_time = update;
    result_.ps_update_exposed = std::max(0.0, update - backward);
    result_.batch_runtime = t + result_.ps_update_exposed;
    return std::move(result_);
  }

  void verify(const SchedulePlan& plan) {
    std::mt19937_64 rng(derive_seed(sim_.seed, 0x7665));
    const LevelPlan* last = nullptr;
    for (const auto& lp : plan.levels) {
      if (lp.get() == last) continue;
      last = lp.get();
      for (std::uint32_t u = 0; u < lp->units.size(); ++u) {
        const auto& shape = lp->units[u].shape;
        if (shape.rows * shape.cols > 4096 || shape.inner > 256) continue;
        const auto a = random_int_matrix(shape.rows, shape.inner, rng);
        const auto b = random_int_matrix(shape.inner, shape.cols, rng);
        IntMatrix c(shape.rows, shape.cols);
        // Each device computes its own tile.
        for (const auto& asg : lp->assignments) {
          if (asg.unit != u) continue;
          for (std::uint64_t i = asg.rect.r0; i < asg.rect.r1; ++i) {
            for (std::uint64_t j = asg.rect.c0; j < asg.rect.c1; ++j) {
              unsigned __int128 acc = 0;
              for (std::size_t k = 0; k < shape.inner; ++k) {
                acc += static_cast<unsigned __int128>(a.at(i, k)) * b.at(k, j);
                acc %= kVerifyPrime;
              }
              c.at(i, j) = static_cast<std::uint64_t>(acc);
            }
          }
        }
        ++result_.verified_units;
        if (!verify_gemm_output(a, b, c, 16, rng)) ++result_.verification_failures;
      }
    }
  }

 private:
  const SchedulePlan& plan_;
  const SimConfig& sim_;
  FleetSpec live_;
  SimResult result_;
  std::map<DeviceId, std::size_t> index_;
  std::size_t patch_level_ = static_cast<std::size_t>(-1);
  double patch_end_ = 0;
  std::map<std::pair<const LevelPlan*, std::vector<DeviceId>>, std::shared_ptr<const LevelPlan>> replans_;

  std::size_t stats_index(DeviceId id) {
    auto it = index_.find(id);
    if (it != index_.end()) return it->second;
    index_[id] = result_.per_device.size();
    result_.per_device.push_back({id, 0, 0, 0, 0});
    return result_.per_device.size() - 1;
  }

  std::shared_ptr<const LevelPlan> replan(const std::shared_ptr<const LevelPlan>& original) {
    std::vector<DeviceId> ids;
    for (const auto& d : live_.devices) ids.push_back(d.id);
    auto key = std::make_pair(original.get(), ids);
    auto it = replans_.find(key);
    if (it != replans_.end()) return it->second;
    auto lp = std::make_shared<const LevelPlan>(
        min_makespan_level(original->units, live_, plan_.dtype_bytes, plan_.options));
    replans_.emplace(std::move(key), lp);
    return lp;
  }

  // Per-device times for one level, with stats accumulated.
  std::vector<DeviceRun> execute(const LevelPlan& lp, std::size_t level) {
    std::map<DeviceId, DeviceRun> by_device;
    for (const auto& a : lp.assignments) {
      if (live_.index_of(a.device) == FleetSpec::npos) {
        throw InfeasibleError(fmt::format("plan assigns work to unknown device {}", a.device), level);
      }
      auto& r = by_device[a.device];
      r.id = a.device;
      const auto& unit = lp.units[a.unit];
      r.raw += raw_cost(unit.shape, a.rect, plan_.dtype_bytes, plan_.options.adjust);
      r.pairs += block_pairs(unit.grid, a.rect);
    }
    std::vector<DeviceRun> runs;
    for (auto& [id, r] : by_device) runs.push_back(r);
    const auto rates = level_rates(runs);
    for (std::size_t i = 0; i < runs.size(); ++i) {
      auto& r = runs[i];
      const auto& d = live_.devices[live_.index_of(r.id)];
      const double mem = r.raw.mem_bytes + plan_.options.adjust.reserved_mem_bytes;
      if (mem > d.mem_capacity * (1 + 1e-9)) {
        throw InfeasibleError(
            fmt::format("device {} needs {:.0f} bytes, capacity {:.0f}", r.id, mem, d.mem_capacity), level);
      }
      r.time = device_time(r, d, rates[i], level);
      auto& st = result_.per_device[stats_index(r.id)];
      st.peak_mem = std::max(st.peak_mem, mem);
      st.dl_volume += r.raw.dl_bytes;
      st.ul_volume += r.raw.ul_bytes;
      st.busy_time += r.time;
    }
    return runs;
  }

  // DL rate of each working device under the PS egress fair share.
  std::vector<double> level_rates(const std::vector<DeviceRun>& runs) const {
    FleetSpec active;
    active.ps = live_.ps;
    for (const auto& r : runs) active.devices.push_back(live_.devices[live_.index_of(r.id)]);
    if (!plan_.options.ps_fair_share) {
      std::vector<double> out;
      for (const auto& d : active.devices) out.push_back(d.dl_bw);
      return out;
    }
    return effective_dl_bandwidth(active);
  }

  double device_time(const DeviceRun& r, const DeviceSpec& d, double dl_rate, std::size_t level) const {
    const double k = static_cast<double>(std::max<std::uint64_t>(r.pairs, 1));
    const double dl = r.raw.dl_bytes / dl_rate;
    const double ul = r.raw.ul_bytes / d.ul_bw;
    const double comp = r.raw.flops / d.flops;
    double t = pipeline_time(dl / k, comp / k, ul / k, std::max<std::uint64_t>(r.pairs, 1));
    if (r.raw.dl_bytes > 0) t += d.dl_overhead;
    if (r.raw.ul_bytes > 0) t += d.ul_overhead;
    if (sim_.latency_mode == LatencyMode::stochastic) {
      Rng rng(derive_seed(derive_seed(sim_.seed, level), d.id));
      t += sample_latency(d.latency, rng);
    }
    return t;
  }

  double fail(const LevelPlan& lp, const std::vector<DeviceRun>& runs, std::vector<DeviceId>& failed_here,
              const ChurnEvent& e, std::size_t level, double start, double level_end) {
    RecoveryEvent ev;
    ev.device = e.device_id;
    ev.level = level;
    ev.fail_time = e.time;
    const DeviceRun* mine = nullptr;
    for (const auto& r : runs)
      if (r.id == e.device_id) mine = &r;
    failed_here.push_back(e.device_id);
    // Nothing lost when the device already uploaded everything.
    if (!mine || e.time >= start + mine->time) {
      result_.recovery_events.push_back(ev);
      return level_end;
    }
    if (patch_level_ != level) {
      patch_level_ = level;
      patch_end_ = 0;
    }
    FleetSpec survivors = live_;
    std::erase_if(survivors.devices, [&](const DeviceSpec& d) {
      return std::find(failed_here.begin(), failed_here.end(), d.id) != failed_here.end();
    });
    if (survivors.devices.empty()) throw InfeasibleError("no survivors to absorb failed work", level);
    const CacheState cache(lp);
    const auto patch = reschedule_on_failure(lp, cache, {e.device_id}, survivors, plan_.dtype_bytes, plan_.options);
    ev.recovery_time = patch.recovery_time;
    ev.failed_area = patch.failed_area;
    ev.patched_area = patch.patched_area;
    result_.recovery_events.push_back(ev);
    for (const auto& dc : patch.patch.device_costs) {
      auto& st = result_.per_device[stats_index(dc.device)];
      st.dl_volume += dc.raw.dl_bytes;
      st.ul_volume += dc.raw.ul_bytes;
      st.busy_time += dc.cost.gemm_cost;
    }
    // The level now ends when the surviving tiles and the patch are done.
    double end = e.time + patch.recovery_time;
    for (const auto& r : runs) {
      if (std::find(failed_here.begin(), failed_here.end(), r.id) == failed_here.end()) {
        end = std::max(end, start + r.time);
      }
    }
    patch_end_ = std::max(patch_end_, end);
    return patch_end_;
  }
};

}  // namespace

SimResult simulate_batch(const SchedulePlan& plan, const FleetSpec& fleet, const SimConfig& sim) {
  return simulate_with_churn(plan, fleet, sim.churn, sim);
}

SimResult simulate_with_churn(const SchedulePlan& plan, const FleetSpec& fleet, const ChurnTrace& churn,
                              const SimConfig& sim) {
  fleet.validate();
  sim.validate(fleet);
  churn.validate(fleet);
  Engine engine(plan, fleet, sim);
  if (sim.verify_outputs) engine.verify(plan);
  return engine.run(churn);
}

std::vector<double> peak_memory(const SchedulePlan& plan, const FleetSpec& fleet) {
  std::vector<double> peak(fleet.size(), 0.0);
  for (const auto& lp : plan.levels) {
    for (const auto& dc : lp->device_costs) {
      const std::size_t k = fleet.index_of(dc.device);
      if (k == FleetSpec::npos) continue;
      peak[k] = std::max(peak[k], dc.raw.mem_bytes);
    }
  }
  return peak;
}

SchedulerOptions ablation_options(const SchedulerOptions& base, const std::set<Ablation>& modes,
                                  double parameter_count, std::size_t devices) {
  SchedulerOptions o = base;
  for (Ablation m : modes) {
    switch (m) {
      case Ablation::no_tp:
        o.whole_instances = true;
        break;
      case Ablation::no_ps:
        // Peer-to-peer: outputs go up twice (reduce + broadcast), inputs come
        // back from peers, and each device keeps its optimizer shard (2 fp32
        // moments per parameter).
        o.adjust.ul_factor = 2.0;
        o.adjust.dl_includes_output = true;
        o.adjust.reserved_mem_bytes = 8.0 * parameter_count / static_cast<double>(std::max<std::size_t>(devices, 1));
        break;
      case Ablation::no_heterogeneity:
        o.uniform_quotas = true;
        break;
    }
  }
  return o;
}

SimResult run_ablation(const GemmDag& dag, const FleetSpec& fleet, Ablation mode, std::uint64_t dtype_bytes,
                       const SimConfig& sim, const SchedulerOptions& base) {
  const auto opt = ablation_options(base, {mode}, sim.parameter_count, fleet.size());
  const auto plan = schedule_dag(dag, fleet, dtype_bytes, opt);
  return simulate_batch(plan, fleet, sim);
}

}  // namespace edgeshard
