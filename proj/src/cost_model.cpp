// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "edgeshard/errors.hpp"

namespace edgeshard {

GemmShape shape_of(const GemmNode& node) {
  return {node.m, node.n_inner, node.q, node.m, node.m};
}

std::uint64_t groups_touched(const GemmShape& shape, std::uint64_t r0, std::uint64_t r1) {
  if (r1 <= r0) return 0;
  return (r1 - 1) / shape.row_group - r0 / shape.row_group + 1;
}

DeviceRates rates_of(const DeviceSpec& d) {
  return {d.flops, d.ul_bw, d.dl_bw, d.ul_overhead, d.dl_overhead, d.mem_capacity};
}

RawCost raw_cost(const GemmShape& shape, const Rect& rect, std::uint64_t dtype_bytes,
                 const CostAdjust& adjust) {
  RawCost out;
  if (rect.empty()) return out;
  const double a = static_cast<double>(rect.alpha());
  const double bt = static_cast<double>(rect.beta());
  const double n = static_cast<double>(shape.inner);
  const double t = static_cast<double>(groups_touched(shape, rect.r0, rect.r1));
  const double b = static_cast<double>(dtype_bytes);
  out.dl_bytes = (a * n + t * n * bt) * b;
  if (adjust.dl_includes_output) out.dl_bytes += a * bt * b;
  out.ul_bytes = a * bt * b * adjust.ul_factor;
  out.flops = 2.0 * a * bt * n;
  out.mem_bytes = (a * n + t * n * bt + a * bt) * b;
  return out;
}

CostBreakdown combine(const RawCost& raw, const DeviceRates& rates) {
  CostBreakdown c;
  c.dl_cost = raw.dl_bytes > 0 ? raw.dl_bytes / rates.dl_bw + rates.dl_overhead : 0.0;
  c.ul_cost = raw.ul_bytes > 0 ? raw.ul_bytes / rates.ul_bw + rates.ul_overhead : 0.0;
  c.comp_cost = raw.flops / rates.flops;
  c.gemm_cost = std::max({c.dl_cost, c.ul_cost, c.comp_cost});
  return c;
}

CostBreakdown cost_breakdown(const DeviceSpec& device, const GemmNode& gemm, std::int64_t alpha,
                             std::int64_t beta, std::uint64_t dtype_bytes) {
  if (alpha < 0 || beta < 0) throw ConfigError("assignment", "alpha and beta must be >= 0");
  const double a = static_cast<double>(alpha);
  const double bt = static_cast<double>(beta);
  const double n = static_cast<double>(gemm.n_inner);
  const double b = static_cast<double>(dtype_bytes);
  CostBreakdown c;
  c.dl_cost = (a * n * b + n * bt * b) / device.dl_bw + device.dl_overhead;
  c.ul_cost = a * bt * b / device.ul_bw + device.ul_overhead;
  c.comp_cost = 2.0 * a * bt * n / device.flops;
  c.gemm_cost = std::max({c.dl_cost, c.ul_cost, c.comp_cost});
  return c;
}

Budget budget_for(const DeviceRates& rates, double T, double fraction, const CostAdjust& adjust) {
  Budget b;
  b.dl_seconds = fraction * (T - rates.dl_overhead);
  b.ul_seconds = fraction * (T - rates.ul_overhead);
  b.comp_seconds = fraction * T;
  b.mem_bytes = fraction * (rates.mem_capacity - adjust.reserved_mem_bytes);
  return b;
}

namespace {

// Ternary search for the maximum of a concave function on integers [lo, hi].
template <class F>
double max_concave_int(F&& f, std::int64_t lo, std::int64_t hi) {
  while (hi - lo > 2) {
    const std::int64_t m1 = lo + (hi - lo) / 3;
    const std::int64_t m2 = hi - (hi - lo) / 3;
    if (f(m1) < f(m2)) lo = m1 + 1;
    else hi = m2;
  }
  double best = 0;
  for (std::int64_t x = lo; x <= hi; ++x) best = std::max(best, f(x));
  return best;
}

}  // namespace

double capacity_area(const GemmShape& shape, const DeviceRates& rates, const Budget& budget,
                     std::uint64_t dtype_bytes, const CostAdjust& adjust) {
  if (budget.dl_seconds <= 0 || budget.ul_seconds <= 0 || budget.comp_seconds <= 0 ||
      budget.mem_bytes <= 0) {
    return 0.0;
  }
  const double b = static_cast<double>(dtype_bytes);
  const double n = static_cast<double>(shape.inner);
  const double cols = static_cast<double>(shape.cols);
  const double dl_elems = budget.dl_seconds * rates.dl_bw / b;
  const double ul_area = budget.ul_seconds * rates.ul_bw / (b * adjust.ul_factor);
  const double comp_area = budget.comp_seconds * rates.flops / (2.0 * n);
  const double mem_elems = budget.mem_bytes / b;
  const double out_dl = adjust.dl_includes_output ? 1.0 : 0.0;

  // Widest feasible tile for a given height spanning t row groups.
  auto beta_max = [&](double alpha, double t) {
    const double by_dl = (dl_elems - alpha * n) / (t * n + out_dl * alpha);
    const double by_mem = (mem_elems - alpha * n) / (t * n + alpha);
    const double beta = std::min({cols, by_dl, by_mem});
    return beta >= 1.0 ? std::floor(beta) : 0.0;
  };

  const std::uint64_t groups = (shape.rows + shape.row_group - 1) / shape.row_group;
  const auto within = static_cast<std::int64_t>(std::min(shape.rows, shape.row_group));
  double best = max_concave_int(
      [&](std::int64_t a) { return static_cast<double>(a) * beta_max(static_cast<double>(a), 1.0); }, 1,
      within);
  if (groups > 1) {
    const double g = static_cast<double>(shape.row_group);
    best = std::max(best, max_concave_int(
                              [&](std::int64_t j) {
                                const double a = g * static_cast<double>(j);
                                return a * beta_max(a, static_cast<double>(j));
                              },
                              2, static_cast<std::int64_t>(groups)));
  }
  const double area = std::min({best, ul_area, comp_area, shape.area()});
  return area > 0 ? std::floor(area) : 0.0;
}

double per_device_capacity(const DeviceSpec& device, const GemmNode& gemm, double T,
                           std::uint64_t dtype_bytes) {
  // Exact over integer tile heights; the width bound is linear for fixed alpha.
  const DeviceRates r = rates_of(device);
  const Budget bud = budget_for(r, T);
  if (bud.dl_seconds < 0 || bud.ul_seconds < 0 || bud.comp_seconds <= 0 || bud.mem_bytes <= 0) return 0.0;
  const double b = static_cast<double>(dtype_bytes);
  const double n = static_cast<double>(gemm.n_inner);
  const double dl_elems = bud.dl_seconds * r.dl_bw / b;
  const double ul_area = bud.ul_seconds * r.ul_bw / b;
  const double comp_area = bud.comp_seconds * r.flops / (2.0 * n);
  const double mem_elems = bud.mem_bytes / b;
  constexpr double kSlack = 1e-9;
  double best = 0;
  for (std::uint64_t a = 1; a <= gemm.m; ++a) {
    const double alpha = static_cast<double>(a);
    const double beta = std::min({static_cast<double>(gemm.q), (dl_elems - alpha * n) / n,
                                  (mem_elems - alpha * n) / (n + alpha), ul_area / alpha, comp_area / alpha});
    if (beta + kSlack < 1.0) continue;
    best = std::max(best, alpha * std::floor(beta + kSlack));
  }
  return best;
}

double capacity_makespan(const GemmShape& shape, const std::vector<DeviceRates>& rates,
                         std::uint64_t dtype_bytes, const CostAdjust& adjust) {
  const double need = shape.area();
  auto covers = [&](double T) {
    double total = 0;
    for (const auto& r : rates) {
      total += capacity_area(shape, r, budget_for(r, T, 1.0, adjust), dtype_bytes, adjust);
      if (total >= need) return true;
    }
    return false;
  };
  double hi = 1e-3;
  while (!covers(hi)) {
    hi *= 2;
    if (hi > 1e12) return std::numeric_limits<double>::infinity();
  }
  double lo = 0;
  for (int it = 0; it < 200 && hi - lo > 1e-9 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (covers(mid) ? hi : lo) = mid;
  }
  return hi;
}

double lower_bound_level(const std::vector<double>& work_flops, const FleetSpec& fleet) {
  if (fleet.devices.empty()) throw ConfigError("fleet.devices", "fleet must be nonempty");
  double total_f = 0, max_f = 0;
  for (const auto& d : fleet.devices) {
    total_f += d.flops;
    max_f = std::max(max_f, d.flops);
  }
  double total_w = 0, max_w = 0;
  for (double w : work_flops) {
    total_w += w;
    max_w = std::max(max_w, w);
  }
  return std::max(total_w / total_f, max_w / max_f);
}

double lower_bound_level(const std::vector<GemmNode>& gemms, const FleetSpec& fleet) {
  // Each instance is its own item.
  std::vector<double> w;
  for (const auto& g : gemms) w.insert(w.end(), g.count, g.flops() / static_cast<double>(g.count));
  return lower_bound_level(w, fleet);
}

}  // namespace edgeshard
