// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>

#include <fmt/format.h>

namespace edgeshard {

TilingGrid make_grid(const GemmShape& shape, std::uint64_t block, bool whole_instances) {
  TilingGrid g;
  g.rows = shape.rows;
  g.cols = shape.cols;
  g.row_group = shape.row_group;
  if (whole_instances) {
    g.row_block = shape.instance_rows;
    g.col_block = shape.cols;
  } else {
    const std::uint64_t blk = std::max<std::uint64_t>(block, 1);
    g.row_block = std::gcd(blk, shape.row_group);
    g.col_block = std::gcd(blk, shape.cols);
  }
  return g;
}

namespace {

struct Bisector {
  const TilingGrid& grid;
  std::vector<Tile> out;

  // Aligned cut nearest to lo + f*(hi-lo), strictly inside (lo, hi).
  static std::uint64_t aligned_cut(std::uint64_t lo, std::uint64_t hi, std::uint64_t step, double f) {
    const double blocks = static_cast<double>(hi - lo) / static_cast<double>(step);
    auto k = static_cast<std::uint64_t>(std::llround(f * blocks));
    const auto total = (hi - lo) / step;
    k = std::clamp<std::uint64_t>(k, 1, total - 1);
    return lo + k * step;
  }

  void run(const Rect& region, std::span<const TileTarget> targets) {
    if (targets.empty()) return;
    const std::uint64_t rb = grid.row_block, cb = grid.col_block;
    const bool can_h = region.alpha() >= 2 * rb;
    const bool can_v = region.beta() >= 2 * cb;
    if (targets.size() == 1 || (!can_h && !can_v)) {
      out.push_back({targets.front().device, region});
      return;
    }
    double total = 0;
    for (const auto& t : targets) total += t.area;
    // Prefix split nearest to half of the total quota.
    std::size_t k = 1;
    double prefix = targets[0].area, best_gap = std::abs(2 * prefix - total);
    double run_sum = prefix;
    for (std::size_t i = 1; i + 1 < targets.size(); ++i) {
      run_sum += targets[i].area;
      const double gap = std::abs(2 * run_sum - total);
      if (gap < best_gap) {
        best_gap = gap;
        k = i + 1;
        prefix = run_sum;
      }
    }
    const double f = total > 0 ? prefix / total : 0.5;

    struct Cut {
      bool horizontal;
      std::uint64_t at;
      double err;
    };
    std::vector<Cut> cuts;
    const double area = region.area();
    auto h_err = [&](std::uint64_t at) {
      return std::abs(static_cast<double>(at - region.r0) * static_cast<double>(region.beta()) / area - f);
    };
    auto v_err = [&](std::uint64_t at) {
      return std::abs(static_cast<double>(at - region.c0) * static_cast<double>(region.alpha()) / area - f);
    };
    // Cut across the longer side, keeping tiles close to square.
    if (can_h && (!can_v || region.alpha() >= region.beta())) {
      const auto at = aligned_cut(region.r0, region.r1, rb, f);
      cuts.push_back({true, at, h_err(at)});
    } else {
      const auto at = aligned_cut(region.c0, region.c1, cb, f);
      cuts.push_back({false, at, v_err(at)});
    }
    const std::uint64_t G = grid.row_group;
    const std::uint64_t first_boundary = (region.r0 / G + 1) * G;
    if (first_boundary < region.r1) {
      // Row-group boundary cut: children touch fewer B slabs.
      const double target = static_cast<double>(region.r0) + f * static_cast<double>(region.alpha());
      std::uint64_t nb = static_cast<std::uint64_t>(std::llround(target / static_cast<double>(G))) * G;
      nb = std::clamp<std::uint64_t>(nb, first_boundary, ((region.r1 - 1) / G) * G);
      const double err = h_err(nb);
      if (err <= cuts.front().err + 0.02) cuts.front() = {true, nb, err};
    }
    const Cut& c = cuts.front();
    Rect a = region, b = region;
    if (c.horizontal) {
      a.r1 = c.at;
      b.r0 = c.at;
    } else {
      a.c1 = c.at;
      b.c0 = c.at;
    }
    run(a, targets.subspan(0, k));
    run(b, targets.subspan(k));
  }
};

}  // namespace

std::vector<Tile> bisection_tiling(const TilingGrid& grid, const Rect& region,
                                   std::vector<TileTarget> targets) {
  const double half_block = 0.5 * static_cast<double>(grid.row_block) * static_cast<double>(grid.col_block);
  std::stable_sort(targets.begin(), targets.end(), [](const TileTarget& x, const TileTarget& y) {
    if (x.area != y.area) return x.area > y.area;
    return x.device < y.device;
  });
  std::vector<TileTarget> kept;
  for (const auto& t : targets)
    if (t.area >= half_block) kept.push_back(t);
  if (kept.empty() && !targets.empty()) kept.push_back(targets.front());
  // No more participants than blocks.
  const std::uint64_t blocks = ((region.alpha() + grid.row_block - 1) / grid.row_block) *
                               ((region.beta() + grid.col_block - 1) / grid.col_block);
  if (kept.size() > blocks) kept.resize(blocks);
  Bisector b{grid, {}};
  b.run(region, kept);
  return std::move(b.out);
}

std::vector<Tile> bisection_tiling(const TilingGrid& grid, std::vector<TileTarget> targets) {
  return bisection_tiling(grid, grid.full(), std::move(targets));
}

std::string check_exact_cover(const Rect& region, const std::vector<Rect>& tiles) {
  double total = 0;
  for (const auto& t : tiles) {
    if (t.empty()) return "empty tile";
    if (t.r0 < region.r0 || t.r1 > region.r1 || t.c0 < region.c0 || t.c1 > region.c1) {
      return fmt::format("tile [{},{})x[{},{}) outside region", t.r0, t.r1, t.c0, t.c1);
    }
    total += t.area();
  }
  if (total != region.area()) return fmt::format("covered area {} != region area {}", total, region.area());
  std::vector<Rect> sorted = tiles;
  std::sort(sorted.begin(), sorted.end(), [](const Rect& a, const Rect& b) {
    return a.r0 != b.r0 ? a.r0 < b.r0 : a.c0 < b.c0;
  });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t j = i + 1; j < sorted.size() && sorted[j].r0 < sorted[i].r1; ++j) {
      const bool overlap = sorted[j].c0 < sorted[i].c1 && sorted[i].c0 < sorted[j].c1;
      if (overlap) return "overlapping tiles";
    }
  }
  return {};
}

}  // namespace edgeshard
