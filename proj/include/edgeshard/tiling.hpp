// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exact-cover guillotine tilings of a GEMM output grid from per-device area quotas.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgeshard/cost_model.hpp"

namespace edgeshard {

struct TilingGrid {
  std::uint64_t rows = 1;
  std::uint64_t cols = 1;
  std::uint64_t row_block = 1;  // divides row_group
  std::uint64_t col_block = 1;  // divides cols
  std::uint64_t row_group = 1;  // divides rows

  std::uint64_t row_blocks() const { return (rows + row_block - 1) / row_block; }
  std::uint64_t col_blocks() const { return (cols + col_block - 1) / col_block; }
  Rect full() const { return {0, rows, 0, cols}; }
};

/// Grid for a shape with a preferred block size; block sizes shrink to the
/// largest divisor compatible with the group and column extents.
TilingGrid make_grid(const GemmShape& shape, std::uint64_t block, bool whole_instances = false);

struct TileTarget {
  std::size_t device = 0;  // caller-defined index
  double area = 0;
};

struct Tile {
  std::size_t device = 0;
  Rect rect;
};

/// Recursive bisection: split the targets into two sets of nearly equal total
/// area and cut the region in the same proportion, preferring cuts on row-group
/// boundaries. Targets below half a block are dropped. Every cell of `region`
/// is covered exactly once.
std::vector<Tile> bisection_tiling(const TilingGrid& grid, const Rect& region,
                                   std::vector<TileTarget> targets);
std::vector<Tile> bisection_tiling(const TilingGrid& grid, std::vector<TileTarget> targets);

/// Empty string when the tiles partition `region` exactly.
std::string check_exact_cover(const Rect& region, const std::vector<Rect>& tiles);

}  // namespace edgeshard
