// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <random>

#include "doctest.h"
#include "edgeshard/cost_model.hpp"
#include "edgeshard/errors.hpp"
#include "edgeshard/tiling.hpp"

using namespace edgeshard;

namespace {

constexpr double kBig = 1e300;

DeviceSpec device(double flops, double ul, double dl, double lu, double ld, double mem) {
  DeviceSpec d;
  d.flops = flops;
  d.ul_bw = ul;
  d.dl_bw = dl;
  d.ul_overhead = lu;
  d.dl_overhead = ld;
  d.mem_capacity = mem;
  return d;
}

GemmNode gemm(std::uint64_t m, std::uint64_t n, std::uint64_t q) {
  GemmNode g;
  g.m = m;
  g.n_inner = n;
  g.q = q;
  return g;
}

// Exhaustive maximum of alpha*beta under every per-device constraint.
double capacity_by_enumeration(const DeviceSpec& d, const GemmNode& g, double T, std::uint64_t b) {
  double best = 0;
  const double n = static_cast<double>(g.n_inner), bb = static_cast<double>(b);
  for (std::uint64_t a = 1; a <= g.m; ++a) {
    for (std::uint64_t c = 1; c <= g.q; ++c) {
      const double dl = (a * n * bb + n * c * bb) / d.dl_bw + d.dl_overhead;
      const double ul = a * c * bb / d.ul_bw + d.ul_overhead;
      const double comp = 2.0 * a * c * n / d.flops;
      const double mem = (a * n + n * c + a * c) * bb;
      if (dl <= T && ul <= T && comp <= T && mem <= d.mem_capacity) best = std::max(best, double(a * c));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("cost breakdown") {
  const auto d = device(2, kBig, kBig, 0.25, 0.5, kBig);
  const auto empty = cost_breakdown(d, gemm(4, 4, 4), 0, 0, 2);
  CHECK(empty.dl_cost == 0.5);
  CHECK(empty.ul_cost == 0.25);
  CHECK(empty.comp_cost == 0);
  CHECK(empty.gemm_cost == 0.5);

  const auto c = cost_breakdown(device(2, kBig, kBig, 0, 0, kBig), gemm(3, 1, 5), 3, 5, 2);
  CHECK(c.comp_cost == 15);
  CHECK(c.gemm_cost == 15);

  const auto dl = cost_breakdown(device(1e9, 1e9, 32, 0, 1, kBig), gemm(2, 8, 4), 2, 4, 2);
  CHECK(dl.dl_cost == 4);
  CHECK_THROWS_AS(cost_breakdown(d, gemm(2, 2, 2), -1, 2, 2), ConfigError);
}

TEST_CASE("raw cost matches the per-tile formulas and the memory bound") {
  GemmShape s{8, 4, 8, 8, 8};
  const RawCost r = raw_cost(s, {0, 2, 0, 3}, 2);
  CHECK(r.mem_bytes == 52);  // 2*4*2 + 4*3*2 + 2*3*2
  CHECK(r.flops == 48);
  CHECK(r.ul_bytes == 12);
  CHECK(r.dl_bytes == 40);
  // A tile spanning two row groups downloads two column slabs.
  GemmShape grouped{8, 4, 8, 4, 4};
  CHECK(groups_touched(grouped, 2, 6) == 2);
  CHECK(raw_cost(grouped, {2, 6, 0, 3}, 1).dl_bytes == 4 * 4 + 2 * 4 * 3);
  CostAdjust p2p;
  p2p.ul_factor = 2;
  p2p.dl_includes_output = true;
  const RawCost q = raw_cost(s, {0, 2, 0, 3}, 2, p2p);
  CHECK(q.ul_bytes == 24);
  CHECK(q.dl_bytes == 52);
}

TEST_CASE("per-device capacity") {
  const auto d = device(4, kBig, kBig, 0.01, 0.5, kBig);
  CHECK(per_device_capacity(d, gemm(100, 4, 100), 0.4, 2) == 0);
  // Compute-bound corner: floor(T*F/(2n)).
  const auto fast = device(10, kBig, kBig, 0, 0, kBig);
  CHECK(per_device_capacity(fast, gemm(1000, 3, 1000), 7.0, 2) == std::floor(7.0 * 10 / 6));

  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const auto dev = device(1 + rng() % 50, 1 + rng() % 40, 1 + rng() % 60, (rng() % 3) * 0.1,
                            (rng() % 3) * 0.1, 20 + rng() % 400);
    const auto g = gemm(1 + rng() % 12, 1 + rng() % 5, 1 + rng() % 12);
    const double T = 0.05 * (1 + rng() % 60);
    CHECK(per_device_capacity(dev, g, T, 1) == capacity_by_enumeration(dev, g, T, 1));
  }
  // Monotone in T.
  double prev = 0;
  for (double T = 0; T < 30; T += 0.37) {
    const double c = per_device_capacity(device(3, 7, 11, 0.2, 0.3, 500), gemm(40, 3, 40), T, 1);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("lower bound") {
  FleetSpec one;
  one.devices = {device(4, 1, 1, 0, 0, 1)};
  CHECK(lower_bound_level(std::vector<double>{8, 4}, one) == 3);
  FleetSpec two;
  two.devices = {device(1, 1, 1, 0, 0, 1), device(3, 1, 1, 0, 0, 1)};
  two.devices[1].id = 1;
  CHECK(lower_bound_level(std::vector<double>{8}, two) == doctest::Approx(8.0 / 3));
}

TEST_CASE("bisection tiling covers the grid exactly") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 500; ++i) {
    GemmShape s;
    s.row_group = 1 + rng() % 20;
    s.rows = s.row_group * (1 + rng() % 4);
    s.cols = 1 + rng() % 60;
    s.instance_rows = s.row_group;
    const auto grid = make_grid(s, 1 + rng() % 8);
    std::vector<TileTarget> targets;
    const std::size_t D = 1 + rng() % 12;
    for (std::size_t k = 0; k < D; ++k) targets.push_back({k, static_cast<double>(rng() % 100)});
    const auto tiles = bisection_tiling(grid, targets);
    std::vector<Rect> rects;
    std::set<std::size_t> owners;
    for (const auto& t : tiles) {
      rects.push_back(t.rect);
      CHECK(owners.insert(t.device).second);
      CHECK(t.rect.r0 % grid.row_block == 0);
      CHECK(t.rect.c0 % grid.col_block == 0);
      CHECK(((t.rect.alpha() == 0) == (t.rect.beta() == 0)));
    }
    CHECK(check_exact_cover(grid.full(), rects).empty());
  }
  CHECK_FALSE(check_exact_cover({0, 2, 0, 2}, {{0, 2, 0, 1}, {0, 1, 0, 2}}).empty());
  CHECK_FALSE(check_exact_cover({0, 2, 0, 2}, {{0, 2, 0, 1}}).empty());
}

TEST_CASE("bisection tiling follows quotas") {
  TilingGrid g{64, 64, 1, 1, 64};
  const auto tiles = bisection_tiling(g, {{0, 1024}, {1, 1024}, {2, 2048}});
  std::map<std::size_t, double> area;
  for (const auto& t : tiles) area[t.device] += t.rect.area();
  CHECK(area[2] == 2048);
  CHECK(area[0] == 1024);
  CHECK(area[1] == 1024);
}
