// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "edgeshard/errors.hpp"

namespace edgeshard {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Solver view of a level: regions to tile, device rates and a tile cost.
struct Problem {
  struct Unit {
    GemmShape cap_shape;  // shape used for quota estimation
    TilingGrid grid;
    Rect region;
  };
  std::vector<Unit> units;
  std::vector<DeviceRates> rates;  // mem_capacity already net of reserved memory
  std::vector<DeviceId> ids;
  std::uint64_t dtype = 2;
  CostAdjust adjust;
  std::function<RawCost(std::size_t unit, std::size_t dev, const Rect&)> cost;
  bool exact_small = false;  // exhaustive guillotine search on tiny single-unit problems
};

struct Candidate {
  std::vector<std::vector<Tile>> tiles;  // per unit, Tile::device indexes Problem::rates
  double time = kInf;
};

double evaluate(const Problem& p, const Candidate& c, std::vector<RawCost>* per_device = nullptr) {
  std::vector<RawCost> sums(p.rates.size());
  std::vector<char> used(p.rates.size(), 0);
  for (std::size_t u = 0; u < c.tiles.size(); ++u) {
    for (const auto& t : c.tiles[u]) {
      sums[t.device] += p.cost(u, t.device, t.rect);
      used[t.device] = 1;
    }
  }
  double worst = 0;
  for (std::size_t k = 0; k < sums.size(); ++k) {
    if (!used[k]) continue;
    if (sums[k].mem_bytes > p.rates[k].mem_capacity * (1 + 1e-12)) return kInf;
    worst = std::max(worst, combine(sums[k], p.rates[k]).gemm_cost);
  }
  if (per_device) *per_device = std::move(sums);
  return worst;
}

class Solver {
 public:
  Solver(const Problem& p, const SchedulerOptions& opt) : p_(p), opt_(opt) {}

  Candidate solve(const std::vector<std::size_t>& members) {
    if (opt_.uniform_quotas) return solve_uniform(members);
    Candidate best = solve_capacity(members);
    if (opt_.refine && best.time < kInf) refine(members, best);
    return best;
  }

  double last_quota_time() const { return best_T_; }

 private:
  const Problem& p_;
  const SchedulerOptions& opt_;
  std::vector<double> weights_;
  double best_T_ = kInf;

  double unit_area(std::size_t u) const { return p_.units[u].region.area(); }

  double capacity(std::size_t u, std::size_t k, double T) const {
    return capacity_area(p_.units[u].cap_shape, p_.rates[k],
                         budget_for(p_.rates[k], T, weights_[u], p_.adjust), p_.dtype, p_.adjust);
  }

  // Per-unit quotas at makespan T, or nullopt when capacity falls short.
  std::optional<std::vector<std::vector<TileTarget>>> quotas(const std::vector<std::size_t>& members,
                                                             double T) const {
    std::vector<std::vector<TileTarget>> out(p_.units.size());
    for (std::size_t u = 0; u < p_.units.size(); ++u) {
      double total = 0;
      for (std::size_t k : members) {
        const double c = capacity(u, k, T);
        if (c > 0) out[u].push_back({k, c});
        total += c;
      }
      const double need = unit_area(u);
      if (total < need || total <= 0) return std::nullopt;
      for (auto& t : out[u]) t.area *= need / total;
    }
    return out;
  }

  Candidate tile(const std::vector<std::vector<TileTarget>>& targets) const {
    Candidate c;
    c.tiles.resize(p_.units.size());
    for (std::size_t u = 0; u < p_.units.size(); ++u) {
      c.tiles[u] = bisection_tiling(p_.units[u].grid, p_.units[u].region, targets[u]);
    }
    c.time = evaluate(p_, c);
    return c;
  }

  void set_weights(const std::vector<std::size_t>& members) {
    weights_.assign(p_.units.size(), 1.0);
    if (p_.units.size() == 1) return;
    std::vector<DeviceRates> rates;
    for (std::size_t k : members) rates.push_back(p_.rates[k]);
    std::vector<double> standalone;
    double total = 0;
    for (const auto& u : p_.units) {
      standalone.push_back(capacity_makespan(u.cap_shape, rates, p_.dtype, p_.adjust));
      total += standalone.back();
    }
    if (!std::isfinite(total)) return;  // reported infeasible by the caller
    for (std::size_t u = 0; u < p_.units.size(); ++u) weights_[u] = standalone[u] / total;
  }

  Candidate solve_uniform(const std::vector<std::size_t>& members) {
    weights_.assign(p_.units.size(), 1.0);
    std::vector<std::vector<TileTarget>> targets(p_.units.size());
    for (std::size_t u = 0; u < p_.units.size(); ++u) {
      const double share = unit_area(u) / static_cast<double>(members.size());
      for (std::size_t k : members) targets[u].push_back({k, share});
    }
    return tile(targets);
  }

  Candidate solve_capacity(const std::vector<std::size_t>& members) {
    set_weights(members);
    Candidate best;
    constexpr double kHuge = 1e12;
    if (!quotas(members, kHuge)) return best;

    // Smallest T whose capacities cover every unit.
    double lo = 0, hi = 1e-3;
    while (!quotas(members, hi) && hi < kHuge) hi *= 2;
    for (int it = 0; it < 100 && hi - lo > 1e-6 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (quotas(members, mid) ? hi : lo) = mid;
    }
    const double t_cap = hi;

    auto attempt = [&](double T) {
      auto q = quotas(members, T);
      if (!q) return kInf;
      Candidate c = tile(*q);
      const double realized = c.time;
      if (realized < best.time) {
        best = std::move(c);
        best_T_ = T;
      }
      return realized;
    };

    // Grow T until the realized tiling fits inside it, then bisect.
    lo = t_cap;
    hi = t_cap;
    int grow = 0;
    while (attempt(hi) > hi * (1 + opt_.rel_tol) && grow < 60) {
      lo = hi;
      hi *= 1.5;
      ++grow;
    }
    for (int it = 0; it < opt_.max_iter && hi - lo > opt_.rel_tol * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (attempt(mid) <= mid ? hi : lo) = mid;
    }
    return best;
  }

  // Greedy bisection of `region` among `devs` with quotas rescaled to the region.
  double greedy_cost(const Rect& region, const std::vector<TileTarget>& devs,
                     std::vector<Tile>* out = nullptr) const {
    const auto& grid = p_.units[0].grid;
    double total = 0;
    for (const auto& d : devs) total += d.area;
    std::vector<TileTarget> scaled = devs;
    for (auto& d : scaled) d.area *= region.area() / total;
    auto tiles = bisection_tiling(grid, region, scaled);
    double worst = 0;
    for (const auto& t : tiles) {
      const RawCost raw = p_.cost(0, t.device, t.rect);
      if (raw.mem_bytes > p_.rates[t.device].mem_capacity) return kInf;
      worst = std::max(worst, combine(raw, p_.rates[t.device]).gemm_cost);
    }
    if (out) *out = std::move(tiles);
    return worst;
  }

  std::vector<std::pair<std::vector<TileTarget>, std::vector<TileTarget>>> partitions(
      const std::vector<TileTarget>& devs) const {
    std::vector<std::pair<std::vector<TileTarget>, std::vector<TileTarget>>> parts;
    const std::size_t n = devs.size();
    if (n <= 6) {
      for (std::uint32_t mask = 1; mask < (1u << (n - 1)); ++mask) {
        std::vector<TileTarget> a, b;
        for (std::size_t i = 0; i < n; ++i) ((mask >> i) & 1u ? a : b).push_back(devs[i]);
        parts.emplace_back(std::move(a), std::move(b));
      }
    } else {
      for (std::size_t k = 1; k < n; ++k) {
        parts.emplace_back(std::vector<TileTarget>(devs.begin(), devs.begin() + static_cast<long>(k)),
                           std::vector<TileTarget>(devs.begin() + static_cast<long>(k), devs.end()));
      }
    }
    return parts;
  }

  struct Cut {
    double value = kInf;
    bool split = false;
    std::size_t solo = 0;
    Rect ra, rb;
    std::vector<TileTarget> a, b;
  };

  // Best first cut of `region` when each side is then tiled with `depth - 1`
  // further levels of lookahead (greedy bisection at depth 0).
  Cut best_cut(const Rect& region, const std::vector<TileTarget>& devs, int depth) const {
    const auto& grid = p_.units[0].grid;
    Cut best;
    for (std::size_t i = 0; i < devs.size(); ++i) {
      const RawCost raw = p_.cost(0, devs[i].device, region);
      if (raw.mem_bytes > p_.rates[devs[i].device].mem_capacity) continue;
      const double c = combine(raw, p_.rates[devs[i].device]).gemm_cost;
      if (c < best.value) {
        best.value = c;
        best.solo = i;
      }
    }
    if (devs.size() < 2) return best;
    const auto parts = partitions(devs);
    auto side = [&](const Rect& r, const std::vector<TileTarget>& d) {
      return depth <= 1 ? greedy_cost(r, d) : best_cut(r, d, depth - 1).value;
    };
    auto consider = [&](const Rect& a, const Rect& b) {
      for (const auto& [pa, pb] : parts) {
        const double ca = side(a, pa);
        if (ca >= best.value) continue;
        const double v = std::max(ca, side(b, pb));
        if (v < best.value) {
          best.value = v;
          best.split = true;
          best.a = pa;
          best.b = pb;
          best.ra = a;
          best.rb = b;
        }
      }
    };
    for (std::uint64_t r = region.r0 + grid.row_block; r < region.r1; r += grid.row_block) {
      consider({region.r0, r, region.c0, region.c1}, {r, region.r1, region.c0, region.c1});
    }
    for (std::uint64_t c = region.c0 + grid.col_block; c < region.c1; c += grid.col_block) {
      consider({region.r0, region.r1, region.c0, c}, {region.r0, region.r1, c, region.c1});
    }
    return best;
  }

  void best_tile(const Rect& region, const std::vector<TileTarget>& devs, int depth, std::vector<Tile>& out) const {
    const Cut cut = best_cut(region, devs, depth);
    if (!cut.split) {
      out.push_back({devs[cut.solo].device, region});
      return;
    }
    best_tile(cut.ra, cut.a, depth, out);
    best_tile(cut.rb, cut.b, depth, out);
  }

  // Memoized search over every guillotine tiling on the block grid; devices may idle.
  class Exhaustive {
   public:
    Exhaustive(const Problem& p, const std::vector<std::size_t>& members)
        : p_(p), members_(members), grid_(p.units[0].grid), region_(p.units[0].region) {
      R_ = (region_.alpha() + grid_.row_block - 1) / grid_.row_block;
      C_ = (region_.beta() + grid_.col_block - 1) / grid_.col_block;
      memo_.assign((R_ + 1) * (R_ + 1) * (C_ + 1) * (C_ + 1) << members_.size(), {-1.0, 0});
    }

    double solve(std::vector<Tile>& out) {
      const std::uint32_t all = (1u << members_.size()) - 1;
      const double v = best(0, R_, 0, C_, all);
      if (v < kInf) emit(0, R_, 0, C_, all, out);
      return v;
    }

   private:
    struct Entry {
      double value;
      std::uint64_t choice;  // 0: solo, else encoded cut
    };
    const Problem& p_;
    const std::vector<std::size_t>& members_;
    const TilingGrid& grid_;
    Rect region_;
    std::uint64_t R_ = 0, C_ = 0;
    std::vector<Entry> memo_;

    Rect rect(std::uint64_t r0, std::uint64_t r1, std::uint64_t c0, std::uint64_t c1) const {
      return {region_.r0 + r0 * grid_.row_block, std::min(region_.r1, region_.r0 + r1 * grid_.row_block),
              region_.c0 + c0 * grid_.col_block, std::min(region_.c1, region_.c0 + c1 * grid_.col_block)};
    }
    std::size_t key(std::uint64_t r0, std::uint64_t r1, std::uint64_t c0, std::uint64_t c1,
                    std::uint32_t mask) const {
      return ((((r0 * (R_ + 1) + r1) * (C_ + 1) + c0) * (C_ + 1) + c1) << members_.size()) | mask;
    }
    double solo_cost(std::size_t i, const Rect& r) const {
      const std::size_t k = members_[i];
      const RawCost raw = p_.cost(0, k, r);
      if (raw.mem_bytes > p_.rates[k].mem_capacity) return kInf;
      return combine(raw, p_.rates[k]).gemm_cost;
    }

    // choice encoding: solo device i -> i + 1; cut -> (pos << 34) | (axis << 33) | (1 << 32) | subset.
    double best(std::uint64_t r0, std::uint64_t r1, std::uint64_t c0, std::uint64_t c1, std::uint32_t mask) {
      Entry& e = memo_[key(r0, r1, c0, c1, mask)];
      if (e.value >= 0) return e.value;
      double v = kInf;
      std::uint64_t choice = 0;
      const Rect here = rect(r0, r1, c0, c1);
      for (std::size_t i = 0; i < members_.size(); ++i) {
        if (!((mask >> i) & 1u)) continue;
        const double c = solo_cost(i, here);
        if (c < v) {
          v = c;
          choice = i + 1;
        }
      }
      for (std::uint32_t a = (mask - 1) & mask; a != 0; a = (a - 1) & mask) {
        const std::uint32_t b = mask ^ a;
        for (std::uint64_t r = r0 + 1; r < r1; ++r) {
          const double top = best(r0, r, c0, c1, a);
          if (top >= v) continue;
          const double w = std::max(top, best(r, r1, c0, c1, b));
          if (w < v) {
            v = w;
            choice = (r << 34) | (0ull << 33) | (1ull << 32) | a;
          }
        }
        for (std::uint64_t c = c0 + 1; c < c1; ++c) {
          const double left = best(r0, r1, c0, c, a);
          if (left >= v) continue;
          const double w = std::max(left, best(r0, r1, c, c1, b));
          if (w < v) {
            v = w;
            choice = (c << 34) | (1ull << 33) | (1ull << 32) | a;
          }
        }
      }
      Entry& slot = memo_[key(r0, r1, c0, c1, mask)];
      slot = {v, choice};
      return v;
    }

    void emit(std::uint64_t r0, std::uint64_t r1, std::uint64_t c0, std::uint64_t c1, std::uint32_t mask,
              std::vector<Tile>& out) const {
      const std::uint64_t choice = memo_[key(r0, r1, c0, c1, mask)].choice;
      if (!(choice >> 32)) {
        out.push_back({members_[choice - 1], rect(r0, r1, c0, c1)});
        return;
      }
      const auto a = static_cast<std::uint32_t>(choice & 0xffffffffu);
      const std::uint64_t pos = choice >> 34;
      if ((choice >> 33) & 1u) {
        emit(r0, r1, c0, pos, a, out);
        emit(r0, r1, pos, c1, mask ^ a, out);
      } else {
        emit(r0, pos, c0, c1, a, out);
        emit(pos, r1, c0, c1, mask ^ a, out);
      }
    }
  };

  void refine(const std::vector<std::size_t>& members, Candidate& best) {
    if (p_.units.size() != 1 || members.size() > 32) return;
    const auto& u = p_.units[0];
    const std::uint64_t rbk = (u.region.alpha() + u.grid.row_block - 1) / u.grid.row_block;
    const std::uint64_t cbk = (u.region.beta() + u.grid.col_block - 1) / u.grid.col_block;
    if (p_.exact_small && rbk <= 12 && cbk <= 12 && members.size() <= 4) {
      Candidate c;
      c.tiles.resize(1);
      Exhaustive(p_, members).solve(c.tiles[0]);
      c.time = evaluate(p_, c);
      if (c.time < best.time) best = std::move(c);
      return;
    }
    if (rbk > 32 || cbk > 32) return;
    auto q = quotas(members, best_T_);
    if (!q || (*q)[0].empty()) return;
    std::vector<TileTarget> devs = (*q)[0];
    std::stable_sort(devs.begin(), devs.end(), [](const TileTarget& a, const TileTarget& b) {
      if (a.area != b.area) return a.area > b.area;
      return a.device < b.device;
    });
    // Deeper lookahead where the cut space is small.
    const int depth = (rbk <= 16 && cbk <= 16 && devs.size() <= 4) ? 2 : 1;
    Candidate c;
    c.tiles.resize(1);
    best_tile(u.region, devs, depth, c.tiles[0]);
    c.time = evaluate(p_, c);
    if (c.time < best.time) best = std::move(c);
  }
};

Candidate solve_problem(const Problem& p, const SchedulerOptions& opt) {
  const std::size_t D = p.rates.size();
  Candidate best;
  auto consider = [&](const std::vector<std::size_t>& members) {
    Solver s(p, opt);
    Candidate c = s.solve(members);
    if (c.time < best.time) best = std::move(c);
  };
  if (D <= 6 && !opt.uniform_quotas) {
    // Small fleets: the best over every device subset, which also makes the
    // result monotone in the fleet.
    for (std::uint32_t mask = 1; mask < (1u << D); ++mask) {
      std::vector<std::size_t> members;
      for (std::size_t k = 0; k < D; ++k)
        if ((mask >> k) & 1u) members.push_back(k);
      consider(members);
    }
  } else {
    std::vector<std::size_t> all(D);
    std::iota(all.begin(), all.end(), 0);
    consider(all);
  }
  return best;
}

}  // namespace

std::vector<DeviceRates> scheduler_rates(const FleetSpec& fleet, const SchedulerOptions& opt) {
  std::vector<DeviceRates> rates;
  const auto eff = opt.ps_fair_share ? effective_dl_bandwidth(fleet) : std::vector<double>{};
  for (std::size_t k = 0; k < fleet.size(); ++k) {
    DeviceRates r = rates_of(fleet.devices[k]);
    if (opt.ps_fair_share) r.dl_bw = eff[k];
    r.mem_capacity -= opt.adjust.reserved_mem_bytes;
    rates.push_back(r);
  }
  return rates;
}

RawCost patch_raw_cost(const WorkUnit& unit, std::uint32_t unit_index, DeviceId device, const Rect& rect,
                       const CacheState& cache, std::uint64_t dtype_bytes, const CostAdjust& adjust) {
  RawCost raw = raw_cost(unit.shape, rect, dtype_bytes, adjust);
  const double b = static_cast<double>(dtype_bytes);
  const double missing = cache.missing_elements(unit, unit_index, device, rect);
  const double out_elems = rect.area();
  raw.dl_bytes = missing * b + (adjust.dl_includes_output ? out_elems * b : 0.0);
  raw.mem_bytes = (missing + out_elems) * b;
  return raw;
}

namespace {

LevelPlan to_level_plan(const Problem& p, const Candidate& c, std::vector<WorkUnit> units,
                        const std::vector<std::uint32_t>& unit_of_region) {
  LevelPlan plan;
  plan.units = std::move(units);
  std::vector<RawCost> sums;
  plan.level_time = evaluate(p, c, &sums);
  std::vector<char> used(p.rates.size(), 0);
  for (std::size_t u = 0; u < c.tiles.size(); ++u) {
    for (const auto& t : c.tiles[u]) {
      Assignment a;
      a.unit = unit_of_region[u];
      a.device = p.ids[t.device];
      a.rect = t.rect;
      a.cost = combine(p.cost(u, t.device, t.rect), p.rates[t.device]);
      plan.assignments.push_back(a);
      used[t.device] = 1;
    }
  }
  std::sort(plan.assignments.begin(), plan.assignments.end(), [](const Assignment& a, const Assignment& b) {
    if (a.unit != b.unit) return a.unit < b.unit;
    if (a.device != b.device) return a.device < b.device;
    return std::tie(a.rect.r0, a.rect.c0) < std::tie(b.rect.r0, b.rect.c0);
  });
  for (std::size_t k = 0; k < p.rates.size(); ++k) {
    if (!used[k]) continue;
    plan.device_costs.push_back({p.ids[k], sums[k], combine(sums[k], p.rates[k])});
  }
  std::sort(plan.device_costs.begin(), plan.device_costs.end(),
            [](const DeviceLevelCost& a, const DeviceLevelCost& b) { return a.device < b.device; });
  return plan;
}

std::uint64_t weight_count(OpKind op) { return op == OpKind::qkv_proj ? 3 : 1; }

}  // namespace

const DeviceLevelCost* LevelPlan::device_cost(DeviceId id) const {
  auto it = std::lower_bound(device_costs.begin(), device_costs.end(), id,
                             [](const DeviceLevelCost& c, DeviceId v) { return c.device < v; });
  return it != device_costs.end() && it->device == id ? &*it : nullptr;
}

std::vector<WorkUnit> build_work_units(const GemmDag& dag, const std::vector<NodeId>& level,
                                       const SchedulerOptions& opt) {
  struct Group {
    std::uint32_t layer;
    OpKind family;
    Pass pass;
    std::vector<NodeId> nodes;
  };
  std::vector<Group> groups;
  for (NodeId id : level) {
    const auto& n = dag.nodes[id];
    const OpKind family = n.op == OpKind::mlp_gate ? OpKind::mlp_up : n.op;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.layer == n.layer && g.family == family && g.pass == n.pass;
    });
    if (it == groups.end()) groups.push_back({n.layer, family, n.pass, {id}});
    else it->nodes.push_back(id);
  }
  std::vector<WorkUnit> units;
  for (const auto& g : groups) {
    const auto& first = dag.nodes[g.nodes.front()];
    const bool per_instance = has_per_instance_operands(first.op) || first.pass == Pass::backward_weight;
    WorkUnit u;
    u.nodes = g.nodes;
    u.kind = kind_name(first.op, first.pass);
    GemmShape s;
    s.rows = first.m * first.count;
    s.inner = first.n_inner;
    s.cols = first.q;
    s.instance_rows = first.m;
    s.row_group = per_instance ? first.m : s.rows / weight_count(first.op);
    if (g.nodes.size() > 1) {
      // Fused up/gate: same A for forward and weight gradients (columns
      // concatenate), summed input gradients (inner dimension concatenates).
      u.kind = kind_name(OpKind::mlp_up, first.pass);
      u.kind.replace(0, 6, "mlp_up_gate");
      for (std::size_t i = 1; i < g.nodes.size(); ++i) {
        const auto& other = dag.nodes[g.nodes[i]];
        if (first.pass == Pass::backward_input) s.inner += other.n_inner;
        else s.cols += other.q;
      }
    }
    u.shape = s;
    u.grid = make_grid(s, opt.block, opt.whole_instances);
    units.push_back(std::move(u));
  }
  return units;
}

LevelPlan min_makespan_level(const std::vector<WorkUnit>& units, const FleetSpec& fleet,
                             std::uint64_t dtype_bytes, const SchedulerOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  fleet.validate();
  if (units.empty()) return {};
  Problem p;
  p.rates = scheduler_rates(fleet, opt);
  for (const auto& d : fleet.devices) p.ids.push_back(d.id);
  p.dtype = dtype_bytes;
  p.adjust = opt.adjust;
  for (const auto& u : units) p.units.push_back({u.shape, u.grid, u.grid.full()});
  p.cost = [&](std::size_t u, std::size_t, const Rect& r) {
    return raw_cost(units[u].shape, r, dtype_bytes, opt.adjust);
  };
  Candidate best = solve_problem(p, opt);
  if (!(best.time < kInf)) throw InfeasibleError("fleet cannot cover the level under its memory limits");
  std::vector<std::uint32_t> ids(units.size());
  std::iota(ids.begin(), ids.end(), 0);
  LevelPlan plan = to_level_plan(p, best, units, ids);
  plan.solver_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return plan;
}

LevelPlan min_makespan_level(const std::vector<GemmNode>& gemms, const FleetSpec& fleet,
                             std::uint64_t dtype_bytes, const SchedulerOptions& opt) {
  std::vector<WorkUnit> units;
  for (const auto& g : gemms) {
    WorkUnit u;
    u.kind = g.kind();
    u.nodes = {g.id};
    u.shape = {g.m * g.count, g.n_inner, g.q, g.m, g.m};
    u.grid = make_grid(u.shape, opt.block, opt.whole_instances);
    units.push_back(std::move(u));
  }
  return min_makespan_level(units, fleet, dtype_bytes, opt);
}

SchedulePlan schedule_dag(const GemmDag& dag, const FleetSpec& fleet, std::uint64_t dtype_bytes,
                          const SchedulerOptions& opt) {
  SchedulePlan plan;
  plan.dtype_bytes = dtype_bytes;
  plan.options = opt;
  std::map<std::string, std::shared_ptr<const LevelPlan>> memo;
  double t = 0;
  for (std::size_t s = 0; s < dag.levels.size(); ++s) {
    auto units = build_work_units(dag, dag.levels[s], opt);
    std::string sig;
    for (const auto& u : units) {
      sig += fmt::format("{}:{}x{}x{}/{}/{};", u.kind, u.shape.rows, u.shape.inner, u.shape.cols,
                         u.shape.row_group, u.shape.instance_rows);
    }
    auto it = memo.find(sig);
    std::shared_ptr<const LevelPlan> lp;
    if (it != memo.end()) {
      // Same shapes in another layer. Node ids in the shared plan are those of
      // the first such level; dag.levels[s] has the real ones.
      lp = it->second;
    } else {
      try {
        lp = std::make_shared<const LevelPlan>(min_makespan_level(units, fleet, dtype_bytes, opt));
      } catch (const InfeasibleError&) {
        throw InfeasibleError("fleet cannot cover the level under its memory limits", s);
      }
      memo.emplace(sig, lp);
    }
    t += lp->level_time;
    plan.level_end_times.push_back(t);
    plan.levels.push_back(std::move(lp));
  }
  plan.makespan = t;
  return plan;
}

std::string plan_table(const SchedulePlan& plan) {
  std::string out = fmt::format("{:>5} {:>4} {:<22} {:>6} {:>20} {:>20} {:>12} {:>12} {:>12}\n", "level",
                                "unit", "kind", "device", "rows", "cols", "dl_s", "ul_s", "comp_s");
  for (std::size_t s = 0; s < plan.levels.size(); ++s) {
    const auto& lp = *plan.levels[s];
    for (const auto& a : lp.assignments) {
      out += fmt::format("{:>5} {:>4} {:<22} {:>6} {:>20} {:>20} {:>12.6g} {:>12.6g} {:>12.6g}\n", s, a.unit,
                         lp.units[a.unit].kind, a.device, fmt::format("[{},{})", a.rect.r0, a.rect.r1),
                         fmt::format("[{},{})", a.rect.c0, a.rect.c1), a.cost.dl_cost, a.cost.ul_cost,
                         a.cost.comp_cost);
    }
  }
  return out;
}

double level_lower_bound(const std::vector<WorkUnit>& units, const FleetSpec& fleet) {
  double total_f = 0, max_f = 0;
  for (const auto& d : fleet.devices) {
    total_f += d.flops;
    max_f = std::max(max_f, d.flops);
  }
  double total_w = 0, max_item = 0;
  for (const auto& u : units) {
    total_w += u.shape.flops();
    max_item = std::max(max_item, 2.0 * static_cast<double>(u.grid.row_block) *
                                      static_cast<double>(u.grid.col_block) * static_cast<double>(u.shape.inner));
  }
  return std::max(total_w / total_f, max_item / max_f);
}

// ---------------------------------------------------------------------------
// Cache state and failure rescheduling.

namespace {

const std::vector<Rect> kNoTiles;

// Length of the union of [lo, hi) intervals clipped to [a, b).
std::uint64_t covered_length(std::vector<std::pair<std::uint64_t, std::uint64_t>> iv, std::uint64_t a,
                             std::uint64_t b) {
  std::sort(iv.begin(), iv.end());
  std::uint64_t total = 0, cur = a;
  for (auto [lo, hi] : iv) {
    lo = std::max(lo, cur);
    hi = std::min(hi, b);
    if (hi > lo) {
      total += hi - lo;
      cur = hi;
    }
  }
  return total;
}

}  // namespace

CacheState::CacheState(const LevelPlan& level) {
  for (const auto& a : level.assignments) add(a.unit, a.device, a.rect);
}

void CacheState::add(std::uint32_t unit, DeviceId device, const Rect& rect) {
  tiles_[{unit, device}].push_back(rect);
}

const std::vector<Rect>& CacheState::tiles(std::uint32_t unit, DeviceId device) const {
  auto it = tiles_.find({unit, device});
  return it == tiles_.end() ? kNoTiles : it->second;
}

std::vector<bool> CacheState::row_presence(std::uint32_t unit, DeviceId device, std::uint64_t rows) const {
  std::vector<bool> r(rows, false);
  for (const auto& t : tiles(unit, device))
    for (std::uint64_t i = t.r0; i < std::min(t.r1, rows); ++i) r[i] = true;
  return r;
}

std::vector<bool> CacheState::col_presence(std::uint32_t unit, DeviceId device, std::uint64_t cols) const {
  std::vector<bool> c(cols, false);
  for (const auto& t : tiles(unit, device))
    for (std::uint64_t j = t.c0; j < std::min(t.c1, cols); ++j) c[j] = true;
  return c;
}

std::uint64_t CacheState::cached_rows(std::uint32_t unit, DeviceId device) const {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> iv;
  for (const auto& t : tiles(unit, device)) iv.emplace_back(t.r0, t.r1);
  return covered_length(iv, 0, std::numeric_limits<std::uint64_t>::max());
}

std::uint64_t CacheState::cached_cols(std::uint32_t unit, DeviceId device) const {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> iv;
  for (const auto& t : tiles(unit, device)) iv.emplace_back(t.c0, t.c1);
  return covered_length(iv, 0, std::numeric_limits<std::uint64_t>::max());
}

double CacheState::missing_elements(const WorkUnit& unit, std::uint32_t unit_index, DeviceId device,
                                    const Rect& rect) const {
  if (rect.empty()) return 0;
  const auto& held = tiles(unit_index, device);
  const double n = static_cast<double>(unit.shape.inner);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> rows;
  for (const auto& t : held) rows.emplace_back(t.r0, t.r1);
  const double missing_rows =
      static_cast<double>(rect.alpha() - covered_length(rows, rect.r0, rect.r1));
  // Columns of B are per row group.
  const std::uint64_t G = unit.shape.row_group;
  double missing_cols = 0;
  for (std::uint64_t g = rect.r0 / G; g <= (rect.r1 - 1) / G; ++g) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> cols;
    for (const auto& t : held) {
      if (t.r0 < (g + 1) * G && g * G < t.r1) cols.emplace_back(t.c0, t.c1);
    }
    missing_cols += static_cast<double>(rect.beta() - covered_length(cols, rect.c0, rect.c1));
  }
  return (missing_rows + missing_cols) * n;
}

PatchResult reschedule_on_failure(const LevelPlan& level, const CacheState& cache,
                                  const std::vector<DeviceId>& failed, const FleetSpec& live,
                                  std::uint64_t dtype_bytes, const SchedulerOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  PatchResult out;
  auto is_failed = [&](DeviceId id) { return std::find(failed.begin(), failed.end(), id) != failed.end(); };

  Problem p;
  std::vector<std::uint32_t> unit_of_region;
  for (const auto& a : level.assignments) {
    if (!is_failed(a.device)) continue;
    const auto& u = level.units[a.unit];
    GemmShape cap = u.shape;
    cap.rows = a.rect.alpha();
    cap.cols = a.rect.beta();
    cap.row_group = std::min(u.shape.row_group, cap.rows);
    p.units.push_back({cap, u.grid, a.rect});
    unit_of_region.push_back(a.unit);
    out.failed_area += a.rect.area();
  }
  out.patch.units = level.units;
  if (p.units.empty()) {
    out.patch.solver_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

  FleetSpec survivors = live;
  std::erase_if(survivors.devices, [&](const DeviceSpec& d) { return is_failed(d.id); });
  if (survivors.devices.empty()) throw InfeasibleError("no surviving devices to absorb failed tiles");
  p.rates = scheduler_rates(survivors, opt);
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    const DeviceId id = survivors.devices[k].id;
    p.ids.push_back(id);
    // The level's own working set stays resident while the patch runs.
    if (const auto* dc = level.device_cost(id)) p.rates[k].mem_capacity -= dc->raw.mem_bytes;
  }
  p.dtype = dtype_bytes;
  p.adjust = opt.adjust;
  // Cached rows and columns make tile costs non-separable, so capacity quotas
  // are a weak guide; tiny patches are searched exhaustively.
  p.exact_small = true;
  p.cost = [&](std::size_t r, std::size_t k, const Rect& rect) {
    const std::uint32_t ui = unit_of_region[r];
    return patch_raw_cost(level.units[ui], ui, p.ids[k], rect, cache, dtype_bytes, opt.adjust);
  };

  Candidate best = solve_problem(p, opt);
  // Whole patch on a single survivor: wins when one device already caches it.
  for (std::size_t k = 0; k < p.rates.size(); ++k) {
    Candidate c;
    for (const auto& u : p.units) c.tiles.push_back({Tile{k, u.region}});
    c.time = evaluate(p, c);
    if (c.time < best.time) best = std::move(c);
  }
  if (!(best.time < kInf)) throw InfeasibleError("survivors cannot absorb the failed tiles");

  out.patch = to_level_plan(p, best, level.units, unit_of_region);
  for (const auto& a : out.patch.assignments) out.patched_area += a.rect.area();
  out.recovery_time = out.patch.level_time;
  out.patch.solver_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace edgeshard
