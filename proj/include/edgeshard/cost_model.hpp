// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-device cost of computing an output rectangle of a GEMM: download of
// the needed rows of A and columns of B, upload of the output tile, and
// local compute. The three overlap, so a tile costs their maximum.

#pragma once

#include <cstdint>
#include <vector>

#include "edgeshard/fleet.hpp"
#include "edgeshard/model_dag.hpp"

namespace edgeshard {

/// A schedulable matrix product (rows x inner) * (inner x cols). Rows are
/// split into groups of `row_group`; rows in different groups multiply
/// different B operands, so a tile spanning t groups downloads t column slabs.
struct GemmShape {
  std::uint64_t rows = 1;
  std::uint64_t inner = 1;
  std::uint64_t cols = 1;
  std::uint64_t row_group = 1;
  std::uint64_t instance_rows = 1;  // rows of one independent GEMM instance

  double area() const { return static_cast<double>(rows) * static_cast<double>(cols); }
  double flops() const { return 2.0 * area() * static_cast<double>(inner); }
};

/// Shape of a single instance of a DAG node.
GemmShape shape_of(const GemmNode& node);

/// Half-open output rectangle [r0, r1) x [c0, c1).
struct Rect {
  std::uint64_t r0 = 0, r1 = 0, c0 = 0, c1 = 0;

  std::uint64_t alpha() const { return r1 - r0; }
  std::uint64_t beta() const { return c1 - c0; }
  double area() const { return static_cast<double>(alpha()) * static_cast<double>(beta()); }
  bool empty() const { return r1 <= r0 || c1 <= c0; }
  bool operator==(const Rect&) const = default;
};

/// Number of row groups a row range touches.
std::uint64_t groups_touched(const GemmShape& shape, std::uint64_t r0, std::uint64_t r1);

struct CostBreakdown {
  double dl_cost = 0;
  double ul_cost = 0;
  double comp_cost = 0;
  double gemm_cost = 0;
};

/// Rates of one device as seen by the scheduler.
struct DeviceRates {
  double flops = 1;
  double ul_bw = 1;
  double dl_bw = 1;
  double ul_overhead = 0;
  double dl_overhead = 0;
  double mem_capacity = 1;
};

DeviceRates rates_of(const DeviceSpec& d);

/// Transfer volumes and work of one tile, before rates are applied.
struct RawCost {
  double dl_bytes = 0;
  double ul_bytes = 0;
  double flops = 0;
  double mem_bytes = 0;

  RawCost& operator+=(const RawCost& o) {
    dl_bytes += o.dl_bytes;
    ul_bytes += o.ul_bytes;
    flops += o.flops;
    mem_bytes += o.mem_bytes;
    return *this;
  }
};

/// Alternative communication accounting. Without a parameter server every
/// output partial is exchanged peer to peer: uploaded twice and also received.
struct CostAdjust {
  double ul_factor = 1.0;
  bool dl_includes_output = false;
  double reserved_mem_bytes = 0;  // memory held outside the GEMM working set
};

RawCost raw_cost(const GemmShape& shape, const Rect& rect, std::uint64_t dtype_bytes,
                 const CostAdjust& adjust = {});

/// Applies rates; overheads are charged once when the corresponding transfer is nonzero.
CostBreakdown combine(const RawCost& raw, const DeviceRates& rates);

/// Cost of an alpha x beta tile of one instance of `gemm` (single row group).
/// alpha = beta = 0 yields overheads only.
CostBreakdown cost_breakdown(const DeviceSpec& device, const GemmNode& gemm, std::int64_t alpha,
                             std::int64_t beta, std::uint64_t dtype_bytes);

/// Per-resource time and memory available to one tile.
struct Budget {
  double dl_seconds = 0;  // excluding the DL overhead
  double ul_seconds = 0;  // excluding the UL overhead
  double comp_seconds = 0;
  double mem_bytes = 0;
};

Budget budget_for(const DeviceRates& rates, double T, double fraction = 1.0,
                  const CostAdjust& adjust = {});

/// Largest tile area alpha*beta meeting every budget, assuming group-aligned rows.
double capacity_area(const GemmShape& shape, const DeviceRates& rates, const Budget& budget,
                     std::uint64_t dtype_bytes, const CostAdjust& adjust = {});

/// Largest alpha*beta with dl, ul, comp <= T and the memory bound satisfied.
double per_device_capacity(const DeviceSpec& device, const GemmNode& gemm, double T,
                           std::uint64_t dtype_bytes);

/// Smallest T at which the devices' capacities cover `shape`; infinity if none.
double capacity_makespan(const GemmShape& shape, const std::vector<DeviceRates>& rates,
                         std::uint64_t dtype_bytes, const CostAdjust& adjust = {});

/// max(sum W / sum F, max W_i / F_max) for indivisible work items W_i (FLOPs).
double lower_bound_level(const std::vector<double>& work_flops, const FleetSpec& fleet);
/// Bound for whole GEMMs of a level, each counted as one work item.
double lower_bound_level(const std::vector<GemmNode>& gemms, const FleetSpec& fleet);

}  // namespace edgeshard
