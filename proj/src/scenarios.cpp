// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "edgeshard/errors.hpp"
#include "edgeshard/tail_analysis.hpp"

namespace edgeshard {

namespace {

using u64 = std::uint64_t;

struct HybridRun {
  SchedulePlan plan;
  SimResult sim;
};

SimConfig sim_config(const Scenario& s) {
  SimConfig c = s.sim;
  c.seed = s.seed;
  c.parameter_count = static_cast<double>(parameter_count(s.model));
  return c;
}

HybridRun run_hybrid(const Scenario& s, const FleetSpec& fleet, bool with_churn = true) {
  HybridRun r;
  const auto dag = build_gemm_dag(s.model, s.train);
  r.plan = schedule_dag(dag, fleet, s.model.dtype_bytes, s.scheduler);
  const auto cfg = sim_config(s);
  r.sim = with_churn && !s.churn.empty() ? simulate_with_churn(r.plan, fleet, s.churn, cfg)
                                         : simulate_batch(r.plan, fleet, cfg);
  return r;
}

/// Same fleet with the injected stragglers removed.
FleetSpec without_stragglers(const Scenario& s) {
  FleetConfig clean = s.fleet;
  clean.straggler_fraction = 0;
  FleetSpec f = build_fleet(clean, s.seed);
  if (s.fleet.straggler_fraction <= 0) return f;
  const auto slow = straggler_ids(f, s.fleet.straggler_fraction, derive_seed(s.seed, 7));
  FleetSpec out;
  out.ps = f.ps;
  for (const auto& d : f.devices)
    if (std::find(slow.begin(), slow.end(), d.id) == slow.end()) out.devices.push_back(d);
  if (out.devices.empty()) throw InfeasibleError("every device is a straggler");
  return out;
}

CsvTable summary_table(const std::string& kind) { return CsvTable(kind, {"metric", "value"}); }

void metric(CsvTable& t, const std::string& name, CsvCell v) { t.add_row({name, std::move(v)}); }

double failed_device_recovery(const Scenario& s, const DeviceSpec& d, bool checkpoint) {
  return checkpoint ? checkpoint_restore_recovery(s.model, s.train, d, s.model.dtype_bytes)
                    : layer_recompute_recovery(s.model, s.train, d, s.model.dtype_bytes);
}

CsvTable recovery_table(const Scenario& s, const FleetSpec& fleet, const SimResult& sim) {
  CsvTable t("recovery", {"device", "level", "fail_time", "recovery_time", "failed_area", "patched_area",
                          "checkpoint_restore", "layer_recompute"});
  for (const auto& e : sim.recovery_events) {
    const std::size_t k = fleet.index_of(e.device);
    const DeviceSpec d = k == FleetSpec::npos ? fleet.devices.front() : fleet.devices[k];
    t.add_row({u64{e.device}, u64{e.level}, e.fail_time, e.recovery_time, e.failed_area, e.patched_area,
               failed_device_recovery(s, d, true), failed_device_recovery(s, d, false)});
  }
  return t;
}

}  // namespace

const CsvTable* CommandResult::find(const std::string& kind) const {
  for (const auto& t : tables)
    if (t.kind() == kind) return &t;
  return nullptr;
}

CommandResult cmd_dag(const Scenario& s) {
  const auto dag = build_gemm_dag(s.model, s.train);
  if (const auto problem = check_dag(dag); !problem.empty()) throw InfeasibleError("invalid DAG: " + problem);
  CsvTable t("dag", {"id", "level", "layer", "kind", "m", "k", "n", "count", "flops"});
  for (const auto& n : dag.nodes)
    t.add_row({u64{n.id}, u64{n.level}, u64{n.layer}, n.kind(), n.m, n.n_inner, n.q, n.count, n.flops()});
  const auto f = total_flops(dag, s.model, s.train);
  CsvTable sum = summary_table("dag_summary");
  metric(sum, "nodes", u64{dag.nodes.size()});
  metric(sum, "levels", u64{dag.num_levels()});
  metric(sum, "gemm_flops", f.gemm_flops);
  metric(sum, "nongemm_flops", f.nongemm_flops_estimate);
  metric(sum, "gemm_fraction", f.gemm_fraction());
  metric(sum, "parameters", parameter_count(s.model));
  return {{std::move(t), std::move(sum)}};
}

CommandResult cmd_schedule(const Scenario& s) {
  const FleetSpec fleet = build_fleet(s.fleet, s.seed);
  const auto dag = build_gemm_dag(s.model, s.train);
  const auto plan = schedule_dag(dag, fleet, s.model.dtype_bytes, s.scheduler);
  CsvTable tiles("plan", {"level", "unit", "kind", "device", "row0", "row1", "col0", "col1", "alpha", "beta",
                          "gemm_cost"});
  CsvTable levels("plan_levels", {"level", "units", "devices", "level_time", "lower_bound", "end_time"});
  double lb_total = 0;
  for (std::size_t l = 0; l < plan.levels.size(); ++l) {
    const auto& lp = *plan.levels[l];
    for (const auto& a : lp.assignments) {
      tiles.add_row({u64{l}, u64{a.unit}, lp.units[a.unit].kind, u64{a.device}, a.rect.r0, a.rect.r1, a.rect.c0,
                     a.rect.c1, a.alpha(), a.beta(), a.cost.gemm_cost});
    }
    const double lb = level_lower_bound(lp.units, fleet);
    lb_total += lb;
    levels.add_row({u64{l}, u64{lp.units.size()}, u64{lp.device_costs.size()}, lp.level_time, lb,
                    plan.level_end_times[l]});
  }
  CsvTable sum = summary_table("plan_summary");
  metric(sum, "makespan", plan.makespan);
  metric(sum, "lower_bound", lb_total);
  metric(sum, "levels", u64{plan.levels.size()});
  metric(sum, "devices", u64{fleet.size()});
  return {{std::move(tiles), std::move(levels), std::move(sum)}};
}

CommandResult cmd_simulate(const Scenario& s) {
  const FleetSpec fleet = build_fleet(s.fleet, s.seed);
  const auto run = run_hybrid(s, fleet);
  const auto& r = run.sim;
  CommandResult out;

  CsvTable sum = summary_table("sim_summary");
  metric(sum, "system", std::string(kSystemName));
  metric(sum, "batch_runtime", r.batch_runtime);
  metric(sum, "predicted_makespan", run.plan.makespan);
  metric(sum, "ps_update_time", r.ps_update_time);
  metric(sum, "ps_update_exposed", r.ps_update_exposed);
  metric(sum, "max_peak_mem", r.max_peak_mem());
  metric(sum, "max_ul_volume", r.max_ul_volume());
  metric(sum, "verified_units", u64{r.verified_units});
  metric(sum, "verification_failures", u64{r.verification_failures});
  metric(sum, "recovery_events", u64{r.recovery_events.size()});
  out.tables.push_back(std::move(sum));

  CsvTable levels("sim_levels", {"level", "time", "barrier_wait"});
  for (std::size_t l = 0; l < r.level_times.size(); ++l) levels.add_row({u64{l}, r.level_times[l], r.barrier_waits[l]});
  out.tables.push_back(std::move(levels));

  CsvTable devices("sim_devices", {"device", "peak_mem", "ul_volume", "dl_volume", "busy_time"});
  for (const auto& d : r.per_device) devices.add_row({u64{d.device}, d.peak_mem, d.ul_volume, d.dl_volume, d.busy_time});
  out.tables.push_back(std::move(devices));

  if (!s.churn.empty()) out.tables.push_back(recovery_table(s, fleet, r));

  if (!s.ablations.empty()) {
    CsvTable ab("ablations", {"mode", "runtime", "max_peak_mem", "max_ul_volume"});
    ab.add_row({std::string("full"), r.batch_runtime, r.max_peak_mem(), r.max_ul_volume()});
    const auto dag = build_gemm_dag(s.model, s.train);
    for (auto mode : s.ablations) {
      const auto a = run_ablation(dag, fleet, mode, s.model.dtype_bytes, sim_config(s), s.scheduler);
      ab.add_row({ablation_name(mode), a.batch_runtime, a.max_peak_mem(), a.max_ul_volume()});
    }
    out.tables.push_back(std::move(ab));
  }
  return out;
}

CommandResult cmd_analyze(const Scenario& s, unsigned jobs) {
  CommandResult out;
  for (const auto& name : s.analyses) {
    if (name == "volumes") {
      CsvTable t("volumes", {"devices", "system", "per_device_ul", "per_device_dl", "per_device_total"});
      for (double dv : s.volume_devices) {
        const auto D = static_cast<u64>(dv);
        const auto b = baseline_volume(s.model, s.train, s.parallelism, s.model.dtype_bytes);
        const auto h = hybrid_volume(s.model, s.train, D, s.model.dtype_bytes);
        t.add_row({D, std::string("baseline"), b.per_device_ul, b.per_device_dl, b.total});
        t.add_row({D, std::string(kSystemName), h.per_device_ul, h.per_device_dl, h.per_device_ul + h.per_device_dl});
      }
      out.tables.push_back(std::move(t));
    } else if (name == "crossovers") {
      const u64 t = s.parallelism.tp_degree;
      CsvTable c = summary_table("crossovers");
      metric(c, "downlink_threshold", crossover_downlink_threshold(s.model, s.train, t));
      metric(c, "downlink_min_devices", crossover_downlink(s.model, s.train, t));
      metric(c, "uplink_threshold", crossover_uplink_threshold(s.model, s.train, t));
      metric(c, "uplink_min_devices", crossover_uplink(s.model, s.train, t));
      FleetConfig one = s.fleet;
      one.devices = std::max<std::size_t>(1, one.devices);
      const auto fleet = build_fleet(one, s.seed);
      const auto tight = tightened_crossover(tightened_params(s.model, s.train, t, fleet.devices.front(),
                                                             s.model.dtype_bytes));
      metric(c, "tightened_min_devices", tight ? CsvCell{*tight} : CsvCell{std::string("none")});
      out.tables.push_back(std::move(c));
    } else if (name == "tail_table") {
      CsvTable t("tail_table", {"distribution", "devices", "expected_max_multiple", "mc_multiple"});
      for (const auto& row : tail_table(s.mc_samples, s.seed, jobs))
        t.add_row({row.distribution, row.devices, row.expected_max_multiple, row.mc_multiple});
      out.tables.push_back(std::move(t));
    } else if (name == "tail_formulas") {
      CsvTable t("tail_formulas", {"quantity", "parameters", "formula", "monte_carlo", "relative_gap"});
      u64 stream = 100;
      for (double a : {2.0, 3.0}) {
        for (double beta : {0.05, 0.1}) {
          Rng rng(derive_seed(s.seed, stream++));
          std::vector<double> xs(s.mc_samples);
          for (auto& x : xs) x = sample_latency(TailModel::pareto(1, a), rng);
          const double mc = risk_adjusted_plan_cost(std::move(xs), {beta, 0}).cvar;
          const double f = cvar_pareto(1, a, beta);
          t.add_row({std::string("cvar_pareto"), fmt::format("alpha={} beta={}", a, beta), f, mc,
                     std::abs(f - mc) / mc});
        }
      }
      for (auto [a, r] : {std::pair{2.0, u64{2}}, std::pair{3.0, u64{2}}, std::pair{2.0, u64{3}}}) {
        const auto v = replication_expected_min(1, a, r, s.mc_samples, derive_seed(s.seed, stream++), jobs);
        t.add_row({std::string("replication_min"), fmt::format("alpha={} r={}", a, r), v.closed_form, v.mc_truth,
                   v.relative_gap()});
      }
      for (auto [a, n, k] : {std::tuple{3.0, u64{3}, u64{2}}, std::tuple{2.0, u64{10}, u64{8}}}) {
        const auto v = coded_order_stat_formula(1, a, n, k, s.mc_samples, derive_seed(s.seed, stream++), jobs);
        t.add_row({std::string("coded_order_stat"), fmt::format("alpha={} n={} k={}", a, n, k), v.closed_form,
                   v.mc_truth, v.relative_gap()});
      }
      out.tables.push_back(std::move(t));
    } else if (name == "recovery") {
      const FleetSpec fleet = build_fleet(s.fleet, s.seed);
      Scenario run = s;
      if (run.churn.empty()) {
        // Default: the first working device of level 0 fails early in it.
        const auto dag = build_gemm_dag(s.model, s.train);
        const auto plan = schedule_dag(dag, fleet, s.model.dtype_bytes, s.scheduler);
        ChurnEvent e;
        e.device_id = plan.levels.front()->device_costs.front().device;
        e.time = 0.1 * plan.levels.front()->level_time;
        run.churn.events.push_back(e);
      }
      out.tables.push_back(recovery_table(s, fleet, run_hybrid(run, fleet).sim));
    } else if (name == "baselines") {
      const FleetSpec fleet = build_fleet(s.fleet, s.seed);
      CsvTable t("baselines", {"system", "runtime", "max_compute", "max_comm", "per_device_volume"});
      const auto h = run_hybrid(s, fleet, false);
      t.add_row({std::string(kSystemName), h.sim.batch_runtime, std::string(""), std::string(""),
                 h.sim.max_ul_volume()});
      for (auto mode : {BaselineMode::alpa_like, BaselineMode::dtfm_like}) {
        ParallelismConfig par = s.parallelism;
        if (mode == BaselineMode::alpa_like) par.pp_stages = 1;
        const auto b = baseline_runtime(s.model, s.train, par, fleet, mode, s.model.dtype_bytes);
        t.add_row({baseline_name(mode), b.runtime, b.max_compute, b.max_comm, b.per_device_volume});
      }
      out.tables.push_back(std::move(t));
    }
  }
  return out;
}

namespace {

struct SweepPoint {
  std::string value;
  Scenario scenario;
};

std::vector<SweepPoint> sweep_points(const Scenario& s) {
  std::vector<SweepPoint> pts;
  const double base_d = static_cast<double>(s.fleet.devices);
  auto scaled = [&](double v) {
    return static_cast<std::size_t>(std::max(1.0, std::round(s.sweep.proportional_devices ? base_d * v : base_d)));
  };
  if (s.sweep.axis == SweepAxis::model) {
    for (const auto& m : s.sweep.models) {
      Scenario p = s;
      p.model = model_preset(m);
      pts.push_back({m, p});
    }
    return pts;
  }
  for (double v : s.sweep.values) {
    Scenario p = s;
    switch (s.sweep.axis) {
      case SweepAxis::devices: p.fleet.devices = static_cast<std::size_t>(v); break;
      case SweepAxis::model_size:
        p.model.num_layers = static_cast<u64>(std::max(1.0, std::round(static_cast<double>(s.model.num_layers) * v)));
        p.fleet.devices = scaled(v);
        break;
      case SweepAxis::batch_size:
        p.train.batch_size = static_cast<u64>(std::max(1.0, std::round(static_cast<double>(s.train.batch_size) * v)));
        p.fleet.devices = scaled(v);
        break;
      case SweepAxis::straggler_fraction: p.fleet.straggler_fraction = v; break;
      default: break;
    }
    pts.push_back({format_cell(v), p});
  }
  return pts;
}

std::vector<std::vector<CsvCell>> run_point(const Scenario& base, const SweepPoint& pt) {
  const Scenario& s = pt.scenario;
  s.validate();
  std::vector<std::vector<CsvCell>> rows;
  const std::string axis = sweep_axis_name(base.sweep.axis);
  const FleetSpec fleet = build_fleet(s.fleet, s.seed);
  const auto h = run_hybrid(s, fleet, false);
  rows.push_back({axis, pt.value, std::string(kSystemName), u64{fleet.size()}, h.sim.batch_runtime, h.plan.makespan,
                  h.sim.max_peak_mem(), h.sim.max_ul_volume()});
  if (base.sweep.axis == SweepAxis::straggler_fraction && s.fleet.straggler_fraction > 0) {
    const FleetSpec ideal = without_stragglers(s);
    const auto e = run_hybrid(s, ideal, false);
    rows.push_back({axis, pt.value, std::string(kSystemName) + "_excluded", u64{ideal.size()}, e.sim.batch_runtime,
                    e.plan.makespan, e.sim.max_peak_mem(), e.sim.max_ul_volume()});
  }
  for (auto mode : base.sweep.baselines) {
    ParallelismConfig par = s.parallelism;
    if (mode == BaselineMode::alpa_like) par.pp_stages = 1;
    const auto b = baseline_runtime(s.model, s.train, par, fleet, mode, s.model.dtype_bytes);
    rows.push_back({axis, pt.value, baseline_name(mode), u64{fleet.size()}, b.runtime, b.runtime, std::string(""),
                    b.per_device_volume});
  }
  return rows;
}

}  // namespace

CommandResult cmd_sweep(const Scenario& s, unsigned jobs) {
  if (s.sweep.axis == SweepAxis::none) throw ConfigError("sweep.axis", "sweep command needs a sweep axis");
  const auto pts = sweep_points(s);
  std::vector<std::vector<std::vector<CsvCell>>> results(pts.size());
  std::vector<std::exception_ptr> errors(pts.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(pts.size())));
  auto work = [&](std::size_t i) {
    try {
      results[i] = run_point(s, pts[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (workers == 1) {
    for (std::size_t i = 0; i < pts.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < pts.size(); i += workers) work(i);
      });
    for (auto& t : pool) t.join();
  }
  // First failing point in axis order wins, independent of scheduling.
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  CsvTable t("sweep", {"axis", "value", "system", "devices", "runtime", "predicted", "max_peak_mem", "max_ul_volume"});
  for (auto& rows : results)
    for (auto& r : rows) t.add_row(std::move(r));
  return {{std::move(t)}};
}

CommandResult run_command(const std::string& command, const Scenario& s, unsigned jobs) {
  if (command == "dag") return cmd_dag(s);
  if (command == "schedule") return cmd_schedule(s);
  if (command == "simulate") return cmd_simulate(s);
  if (command == "analyze") return cmd_analyze(s, jobs);
  if (command == "sweep") return cmd_sweep(s, jobs);
  throw ConfigError("command", "unknown command '" + command + "'");
}

std::vector<std::string> write_outputs(const CommandResult& r, const std::string& scenario_name,
                                       const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError("--out", "cannot create " + out_dir + ": " + ec.message());
  std::vector<std::string> paths;
  for (const auto& t : r.tables) {
    const auto path = (std::filesystem::path(out_dir) / fmt::format("{}_{}.csv", scenario_name, t.kind())).string();
    write_file(path, t.to_string());
    paths.push_back(path);
  }
  return paths;
}

}  // namespace edgeshard
