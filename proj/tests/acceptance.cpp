// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "edgeshard/baselines.hpp"
#include "edgeshard/errors.hpp"
#include "edgeshard/oracle.hpp"
#include "edgeshard/scenarios.hpp"
#include "edgeshard/simulator.hpp"
#include "edgeshard/tail_analysis.hpp"

using namespace edgeshard;

namespace {

// Tolerances.
constexpr double kOracleRatio = 1.05;
constexpr double kStrongScalingHybrid = 1.7;
constexpr double kStrongScalingAlpa = 1.4;
constexpr double kStragglerIdeal = 1.10;
constexpr double kBaselineSlowdown = 5.0;
constexpr double kRecoveryVsCheckpoint = 100.0;
constexpr double kRecoveryVsRecompute = 20.0;
constexpr double kPhoneMemory = 0.5e9;
constexpr double kWeakScalingSpread = 1.15;
constexpr double kTailTolerance = 0.02;
constexpr double kCvarTolerance = 0.02;
constexpr double kReplicationTolerance = 0.02;
constexpr double kFormulaGapFloor = 0.05;
constexpr double kRejectRate = 0.999;
constexpr std::uint64_t kMcSamples = 1000000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<double> runtimes(const CsvTable& t, const std::string& system) {
  std::vector<double> v;
  for (std::size_t i = 0; i < t.rows(); ++i)
    if (t.text(i, "system") == system) v.push_back(t.number(i, "runtime"));
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Outcome dag_fidelity() {
  const auto t0 = Clock::now();
  const auto dag = build_gemm_dag(model_preset("llama-7b"), {128, 1024, 1});
  struct Row {
    OpKind op;
    std::uint64_t m, k, n, count;
  };
  const Row expected[] = {{OpKind::qkv_proj, 1024, 4096, 4096, 384},
                          {OpKind::attn_score, 1024, 128, 1024, 4096},
                          {OpKind::mlp_up, 1024, 4096, 11008, 128}};
  int matched = 0;
  for (const auto& e : expected) {
    for (const auto& n : dag.nodes) {
      if (n.layer != 0 || n.pass != Pass::forward || n.op != e.op) continue;
      matched += n.m == e.m && n.n_inner == e.k && n.q == e.n && n.count == e.count;
      break;
    }
  }
  const double dt = seconds_since(t0);
  return {matched == 3 && dt < 1.0, fmt::format("{}/3 rows exact, {:.3f}s", matched, dt)};
}

Outcome flop_dominance() {
  std::string detail;
  bool ok = true;
  for (const char* m : {"llama-7b", "llama-13b", "llama-70b"}) {
    const auto model = model_preset(m);
    const TrainConfig t{128, 1024, 1};
    const double f = total_flops(build_gemm_dag(model, t), model, t).gemm_fraction();
    ok = ok && f > 0.99;
    detail += fmt::format("{}={:.4f} ", m, f);
  }
  return {ok, detail};
}

FleetSpec random_small_fleet(std::mt19937_64& rng, std::size_t D) {
  FleetSpec f;
  for (std::size_t k = 0; k < D; ++k) {
    DeviceSpec d;
    d.id = static_cast<DeviceId>(k);
    d.flops = std::uniform_real_distribution<double>(1e3, 1e5)(rng);
    d.dl_bw = std::uniform_real_distribution<double>(50, 500)(rng);
    d.ul_bw = d.dl_bw / std::uniform_real_distribution<double>(2, 10)(rng);
    d.dl_overhead = std::uniform_real_distribution<double>(0, 0.2)(rng);
    d.ul_overhead = std::uniform_real_distribution<double>(0, 0.2)(rng);
    d.mem_capacity = 1e9;
    f.devices.push_back(d);
  }
  return f;
}

Outcome scheduler_optimality() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  SchedulerOptions o;
  o.block = 1;
  double worst = 0;
  int over = 0, below = 0;
  for (int i = 0; i < 100; ++i) {
    const auto fleet = random_small_fleet(rng, 1 + rng() % 4);
    GemmNode g;
    g.m = 1 + rng() % 12;
    g.q = 1 + rng() % 12;
    g.n_inner = 1 + rng() % 32;
    const auto lp = min_makespan_level(std::vector<GemmNode>{g}, fleet, 2, o);
    const double opt = brute_force_oracle(g, fleet, 2, o);
    const double lb = level_lower_bound(lp.units, fleet);
    worst = std::max(worst, lp.level_time / opt);
    over += lp.level_time > kOracleRatio * opt;
    below += lp.level_time < lb * (1 - 1e-12);
  }
  const double dt = seconds_since(t0);
  return {over == 0 && below == 0 && dt < 60,
          fmt::format("worst ratio {:.4f}, {} above 1.05x, {} below bound, {:.1f}s", worst, over, below, dt)};
}

Outcome cost_model_invariants() {
  std::mt19937_64 rng(77);
  SchedulerOptions o;
  o.block = 1;
  std::uint64_t cover = 0, overlap = 0, disjunction = 0, memory = 0;
  for (int i = 0; i < 10000; ++i) {
    auto fleet = random_small_fleet(rng, 1 + rng() % 8);
    GemmNode g;
    g.m = 1 + rng() % 48;
    g.q = 1 + rng() % 48;
    g.n_inner = 1 + rng() % 64;
    const std::uint64_t b = 2;
    // Some instances get tight memory.
    const double need = static_cast<double>(g.m * g.n_inner + g.n_inner * g.q + g.m * g.q) * b;
    for (auto& d : fleet.devices) d.mem_capacity = need * std::uniform_real_distribution<double>(0.3, 2)(rng);
    LevelPlan lp;
    try {
      lp = min_makespan_level(std::vector<GemmNode>{g}, fleet, b, o);
    } catch (const InfeasibleError&) {
      continue;
    }
    std::vector<std::uint8_t> seen(g.m * g.q, 0);
    std::uint64_t area = 0;
    std::map<DeviceId, double> mem;
    for (const auto& a : lp.assignments) {
      // A device holds both rows and columns or nothing.
      disjunction += (a.alpha() == 0) != (a.beta() == 0);
      area += a.alpha() * a.beta();
      for (auto r = a.rect.r0; r < a.rect.r1; ++r)
        for (auto c = a.rect.c0; c < a.rect.c1; ++c) overlap += seen[r * g.q + c]++ > 0;
      mem[a.device] += static_cast<double>(a.alpha() * g.n_inner + g.n_inner * a.beta() + a.alpha() * a.beta()) * b;
    }
    cover += area != g.m * g.q;
    for (const auto& [id, bytes] : mem) memory += bytes > fleet.devices[fleet.index_of(id)].mem_capacity * (1 + 1e-9);
  }
  const auto total = cover + overlap + disjunction + memory;
  return {total == 0, fmt::format("cover {}, overlap {}, disjunction {}, memory {} violations", cover, overlap,
                                  disjunction, memory)};
}

Outcome strong_scaling() {
  Scenario s = preset_scenario("strong_scaling");
  s.sweep.values = {32, 64};
  s.sweep.baselines = {BaselineMode::alpa_like};
  const auto r = cmd_sweep(s);
  const auto h = runtimes(*r.find("sweep"), kSystemName);
  const auto a = runtimes(*r.find("sweep"), "alpa_like");
  const double gh = h[0] / h[1], ga = a[0] / a[1];
  return {gh >= kStrongScalingHybrid && ga <= kStrongScalingAlpa,
          fmt::format("D 32->64: hybrid_tp {:.3f}x, alpa_like {:.3f}x", gh, ga)};
}

Outcome straggler_resilience() {
  const auto r = cmd_sweep(preset_scenario("stragglers"));
  const auto& t = *r.find("sweep");
  std::map<std::pair<std::string, std::string>, double> v;
  for (std::size_t i = 0; i < t.rows(); ++i) v[{t.text(i, "system"), t.text(i, "value")}] = t.number(i, "runtime");
  const double hybrid = v[{kSystemName, "0.2"}];
  const double ideal = v[{std::string(kSystemName) + "_excluded", "0.2"}];
  const double alpa = v[{"alpa_like", "0.2"}] / v[{"alpa_like", "0"}];
  const double dtfm = v[{"dtfm_like", "0.2"}] / v[{"dtfm_like", "0"}];
  return {hybrid <= kStragglerIdeal * ideal && alpa >= kBaselineSlowdown && dtfm >= kBaselineSlowdown,
          fmt::format("hybrid_tp/ideal {:.3f}, alpa_like {:.2f}x, dtfm_like {:.2f}x", hybrid / ideal, alpa, dtfm)};
}

Outcome churn_recovery() {
  const auto r = cmd_simulate(preset_scenario("churn"));
  const auto* t = r.find("recovery");
  if (!t || t->rows() != 1) return {false, "expected exactly one recovery event"};
  const double rec = t->number(0, "recovery_time");
  const double ckpt = t->number(0, "checkpoint_restore");
  const double recompute = t->number(0, "layer_recompute");
  const bool patched = t->number(0, "patched_area") == t->number(0, "failed_area") && t->number(0, "failed_area") > 0;
  return {patched && rec > 0 && rec * kRecoveryVsCheckpoint <= ckpt && rec * kRecoveryVsRecompute <= recompute,
          fmt::format("recovery {:.4f}s vs checkpoint {:.1f}s ({:.0f}x), recompute {:.2f}s ({:.0f}x)", rec, ckpt,
                      ckpt / rec, recompute, recompute / rec)};
}

Outcome memory_cap() {
  const auto r = cmd_sweep(preset_scenario("memory"));
  const auto& t = *r.find("sweep");
  bool ok = t.rows() == 3;
  std::string detail;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const double peak = t.number(i, "max_peak_mem");
    ok = ok && peak <= kPhoneMemory && t.number(i, "devices") == 8192;
    detail += fmt::format("{}={:.1f}MB ", t.text(i, "value"), peak / 1e6);
  }
  return {ok, detail};
}

Outcome volume_curves() {
  const auto r = cmd_analyze(preset_scenario("volumes"));
  const auto& t = *r.find("volumes");
  std::vector<double> D, base, hyb;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    if (t.text(i, "system") == "baseline") {
      base.push_back(t.number(i, "per_device_total"));
      D.push_back(t.number(i, "devices"));
    } else {
      hyb.push_back(t.number(i, "per_device_total"));
    }
  }
  double flat = 0, inverse = 0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    flat = std::max(flat, rel(base[i], base[0]));
    inverse = std::max(inverse, rel(hyb[i] * D[i], hyb[0] * D[0]));
  }
  // CSV cells carry 10 significant digits.
  return {base.size() >= 8 && flat == 0 && inverse < 1e-9,
          fmt::format("{} points, baseline spread {:.1e}, hybrid_tp D*V spread {:.1e}", base.size(), flat, inverse)};
}

Outcome weak_scaling() {
  std::string detail;
  bool ok = true;
  for (const char* name : {"weak_model", "weak_batch"}) {
    const auto r = cmd_sweep(preset_scenario(name));
    const auto v = runtimes(*r.find("sweep"), kSystemName);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    ok = ok && *hi <= kWeakScalingSpread * *lo;
    detail += fmt::format("{} max/min {:.3f} ", name, *hi / *lo);
  }
  return {ok, detail};
}

Outcome tail_table_check() {
  struct Entry {
    const char* label;
    double computed, printed;
  };
  const Entry consistent[] = {{"exp D=100", expected_max_exponential(1, 100), 5.2},
                              {"exp D=1000", expected_max_exponential(1, 1000), 6.9},
                              {"pareto3 D=100", expected_max_pareto(1, 3, 100), 6.9},
                              {"pareto3 D=1000", expected_max_pareto(1, 3, 1000), 14.9}};
  bool ok = true;
  std::string detail;
  for (const auto& e : consistent) {
    const double err = rel(e.computed, e.printed);
    ok = ok && err <= kTailTolerance;
    detail += fmt::format("{} {:.3f} vs {} ({:+.1f}%); ", e.label, e.computed, e.printed,
                          100 * (e.computed - e.printed) / e.printed);
  }
  const double mc = mc_expected_order_stat(TailModel::pareto(1, 3), 100, 100, kMcSamples, 11);
  const double closed = expected_max_pareto(1, 3, 100);
  ok = ok && rel(mc, closed) <= kTailTolerance;
  detail += fmt::format("MC pareto3 D=100 {:.3f} vs closed form {:.3f} ({:+.1f}%); ", mc, closed,
                        100 * (mc - closed) / closed);
  // Reported only.
  const Entry inconsistent[] = {{"pareto2 D=100", expected_max_pareto(1, 2, 100), 10.0},
                                {"pareto2 D=1000", expected_max_pareto(1, 2, 1000), 31.6},
                                {"pareto1.5 D=100", expected_max_pareto(1, 1.5, 100), 21.5},
                                {"pareto1.5 D=1000", expected_max_pareto(1, 1.5, 1000), 100.0}};
  detail += "not matched:";
  for (const auto& e : inconsistent) detail += fmt::format(" {} {:.1f} vs {}", e.label, e.computed, e.printed);
  return {ok, detail};
}

Outcome cvar_check() {
  bool ok = true;
  std::string detail;
  std::uint64_t stream = 0;
  for (double a : {2.0, 3.0}) {
    for (double beta : {0.05, 0.1}) {
      Rng rng(derive_seed(12, stream++));
      std::vector<double> xs(kMcSamples);
      for (auto& x : xs) x = sample_latency(TailModel::pareto(1, a), rng);
      const double mc = risk_adjusted_plan_cost(std::move(xs), {beta, 0}).cvar;
      const double f = cvar_pareto(1, a, beta);
      ok = ok && rel(mc, f) <= kCvarTolerance;
      detail += fmt::format("a={} b={}: {:.3f} vs {:.3f}; ", a, beta, f, mc);
    }
  }
  return {ok, detail};
}

Outcome replication_coding() {
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 40;
  for (auto [a, r] : {std::pair{2.0, std::uint64_t{2}}, std::pair{3.0, std::uint64_t{2}}, std::pair{2.0, std::uint64_t{3}}}) {
    const auto v = replication_expected_min(1, a, r, kMcSamples, seed++);
    const double ra = static_cast<double>(r) * a;
    const double truth = ra / (ra - 1);
    ok = ok && rel(v.mc_truth, truth) <= kReplicationTolerance && v.relative_gap() > kFormulaGapFloor;
    detail += fmt::format("r={} a={}: mc {:.4f} vs {:.4f}, printed {:.4f} (gap {:.0f}%); ", r, a, v.mc_truth, truth,
                          v.closed_form, 100 * v.relative_gap());
  }
  const auto c = coded_order_stat_formula(1, 3, 3, 2, kMcSamples, seed);
  ok = ok && c.relative_gap() > kFormulaGapFloor;
  detail += fmt::format("coded n=3 k=2 a=3: mc {:.4f}, printed {:.4f} (gap {:.0f}%)", c.mc_truth, c.closed_form,
                        100 * c.relative_gap());
  return {ok, detail};
}

Outcome verification() {
  std::mt19937_64 rng(99);
  int accepted = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_int_matrix(1 + rng() % 8, 1 + rng() % 8, rng);
    const auto b = random_int_matrix(a.cols, 1 + rng() % 8, rng);
    accepted += verify_gemm_output(a, b, multiply(a, b), 16, rng);
  }
  int rejected = 0;
  const int corrupt = 10000;
  for (int i = 0; i < corrupt; ++i) {
    const auto a = random_int_matrix(1 + rng() % 8, 1 + rng() % 8, rng);
    const auto b = random_int_matrix(a.cols, 1 + rng() % 8, rng);
    auto c = multiply(a, b);
    auto& x = c.at(rng() % c.rows, rng() % c.cols);
    x = (x + 1 + rng() % (kVerifyPrime - 1)) % kVerifyPrime;
    rejected += !verify_gemm_output(a, b, c, 16, rng);
  }
  const double rate = static_cast<double>(rejected) / corrupt;
  return {accepted == 1000 && rate >= kRejectRate,
          fmt::format("accepted {}/1000 correct, rejected {:.4f} of corruptions", accepted, rate)};
}

Outcome ablations() {
  const auto r = cmd_simulate(preset_scenario("ablation"));
  const auto& t = *r.find("ablations");
  std::map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < t.rows(); ++i) row[t.text(i, "mode")] = i;
  auto get = [&](const char* mode, const char* col) { return t.number(row.at(mode), col); };
  bool ok = true;
  std::string detail;
  for (const char* m : {"no_tp", "no_ps", "no_heterogeneity"}) {
    ok = ok && get(m, "runtime") > get("full", "runtime");
    detail += fmt::format("{} {:.2f}x; ", m, get(m, "runtime") / get("full", "runtime"));
  }
  ok = ok && get("no_tp", "max_peak_mem") > get("full", "max_peak_mem");
  ok = ok && get("no_ps", "max_ul_volume") > get("full", "max_ul_volume");
  detail += fmt::format("no_tp peak mem {:.2f}x, no_ps UL {:.2f}x", get("no_tp", "max_peak_mem") / get("full", "max_peak_mem"),
                        get("no_ps", "max_ul_volume") / get("full", "max_ul_volume"));
  return {ok, detail};
}

std::string render(const CommandResult& r) {
  std::string s;
  for (const auto& t : r.tables) s += t.to_string();
  return s;
}

Outcome determinism() {
  struct Run {
    const char* command;
    Scenario scenario;
    unsigned jobs;
  };
  std::vector<Run> runs;
  for (const char* cmd : {"dag", "schedule", "simulate"}) runs.push_back({cmd, preset_scenario("tiny"), 1});
  Scenario noisy = preset_scenario("tiny");
  noisy.fleet.params.latency = TailModel::pareto(0.01, 2);
  noisy.sim.latency_mode = LatencyMode::stochastic;
  runs.push_back({"simulate", noisy, 1});
  runs.push_back({"simulate", preset_scenario("churn"), 1});
  runs.push_back({"simulate", preset_scenario("ablation"), 1});
  Scenario t5 = preset_scenario("tail");
  t5.mc_samples = 20000;
  runs.push_back({"analyze", t5, 2});
  runs.push_back({"analyze", preset_scenario("volumes"), 1});
  runs.push_back({"sweep", preset_scenario("strong_scaling"), 2});
  int same = 0;
  for (const auto& r : runs) {
    const auto a = render(run_command(r.command, r.scenario, r.jobs));
    const auto b = render(run_command(r.command, r.scenario, 1));
    same += !a.empty() && a == b;
  }
  return {same == static_cast<int>(runs.size()), fmt::format("{}/{} reruns byte-identical", same, runs.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"dag_fidelity", dag_fidelity},
      {"flop_dominance", flop_dominance},
      {"scheduler_optimality", scheduler_optimality},
      {"cost_model_invariants", cost_model_invariants},
      {"strong_scaling", strong_scaling},
      {"straggler_resilience", straggler_resilience},
      {"churn_recovery", churn_recovery},
      {"memory_cap", memory_cap},
      {"volume_curves", volume_curves},
      {"weak_scaling", weak_scaling},
      {"tail_table", tail_table_check},
      {"cvar", cvar_check},
      {"replication_coding", replication_coding},
      {"verification", verification},
      {"ablations", ablations},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2zu %s %s (%.1fs): %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures;
}
