// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Level-by-level rectangle allocation of GEMM outputs across a fleet, and
// cache-aware rescheduling of the tiles lost to a device failure.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "edgeshard/cost_model.hpp"
#include "edgeshard/fleet.hpp"
#include "edgeshard/model_dag.hpp"
#include "edgeshard/tiling.hpp"

namespace edgeshard {

/// GEMMs of one level that are scheduled as a single output grid.
struct WorkUnit {
  std::string kind;
  std::vector<NodeId> nodes;
  GemmShape shape;
  TilingGrid grid;
};

struct SchedulerOptions {
  std::uint64_t block = 64;      // preferred row/col block
  bool refine = true;            // local search on small instances
  bool uniform_quotas = false;   // equal areas regardless of capability
  bool whole_instances = false;  // never split a GEMM instance
  bool ps_fair_share = true;     // cap DL rates by the PS egress share
  CostAdjust adjust;
  double rel_tol = 1e-4;
  int max_iter = 64;
};

/// Merges a level's nodes into work units: microbatches sharing a weight are
/// stacked along rows, per-instance products become row groups, and the
/// up/gate projections of a gated MLP are fused.
std::vector<WorkUnit> build_work_units(const GemmDag& dag, const std::vector<NodeId>& level,
                                       const SchedulerOptions& opt = {});

struct Assignment {
  std::uint32_t unit = 0;
  DeviceId device = 0;
  Rect rect;
  CostBreakdown cost;  // this tile alone, overheads included

  std::uint64_t alpha() const { return rect.alpha(); }
  std::uint64_t beta() const { return rect.beta(); }
};

struct DeviceLevelCost {
  DeviceId device = 0;
  RawCost raw;         // summed over the device's tiles in the level
  CostBreakdown cost;  // one DL and one UL overhead per level
};

struct LevelPlan {
  std::vector<WorkUnit> units;
  std::vector<Assignment> assignments;       // sorted by (unit, device)
  std::vector<DeviceLevelCost> device_costs; // working devices, id ascending
  double level_time = 0;
  double solver_seconds = 0;                 // wall time, informational only

  const DeviceLevelCost* device_cost(DeviceId id) const;
};

LevelPlan min_makespan_level(const std::vector<WorkUnit>& units, const FleetSpec& fleet,
                             std::uint64_t dtype_bytes, const SchedulerOptions& opt = {});
/// Each node becomes its own unit (instances as row groups).
LevelPlan min_makespan_level(const std::vector<GemmNode>& gemms, const FleetSpec& fleet,
                             std::uint64_t dtype_bytes, const SchedulerOptions& opt = {});

struct SchedulePlan {
  std::vector<std::shared_ptr<const LevelPlan>> levels;  // identical levels share a plan
  std::vector<double> level_end_times;
  double makespan = 0;
  std::uint64_t dtype_bytes = 2;
  SchedulerOptions options;
};

SchedulePlan schedule_dag(const GemmDag& dag, const FleetSpec& fleet, std::uint64_t dtype_bytes,
                          const SchedulerOptions& opt = {});

/// One row per assignment: level unit kind device row_range col_range dl ul comp.
std::string plan_table(const SchedulePlan& plan);

/// Rows of A and columns of B held by each device within a level.
class CacheState {
 public:
  CacheState() = default;
  explicit CacheState(const LevelPlan& level);

  void add(std::uint32_t unit, DeviceId device, const Rect& rect);
  const std::vector<Rect>& tiles(std::uint32_t unit, DeviceId device) const;

  /// R_s[k, i] over the unit's rows and C_s[k, j] over its columns.
  std::vector<bool> row_presence(std::uint32_t unit, DeviceId device, std::uint64_t rows) const;
  std::vector<bool> col_presence(std::uint32_t unit, DeviceId device, std::uint64_t cols) const;
  /// alpha = sum_i R[k,i], beta = sum_j C[k,j].
  std::uint64_t cached_rows(std::uint32_t unit, DeviceId device) const;
  std::uint64_t cached_cols(std::uint32_t unit, DeviceId device) const;

  /// Elements of A and B a device must still download to compute `rect`.
  double missing_elements(const WorkUnit& unit, std::uint32_t unit_index, DeviceId device,
                          const Rect& rect) const;

 private:
  std::map<std::pair<std::uint32_t, DeviceId>, std::vector<Rect>> tiles_;
};

struct PatchResult {
  LevelPlan patch;           // assignments over the original units' coordinates
  double recovery_time = 0;  // patch makespan from the failure instant
  double failed_area = 0;
  double patched_area = 0;
};

/// Redistributes the failed devices' tiles of `level` over `live` devices,
/// discounting downloads of rows and columns already cached.
PatchResult reschedule_on_failure(const LevelPlan& level, const CacheState& cache,
                                  const std::vector<DeviceId>& failed, const FleetSpec& live,
                                  std::uint64_t dtype_bytes, const SchedulerOptions& opt = {});

/// Device rates the scheduler plans with (PS fair share, reserved memory).
std::vector<DeviceRates> scheduler_rates(const FleetSpec& fleet, const SchedulerOptions& opt);

/// Tile cost on a device that may already hold some of the needed rows and columns.
RawCost patch_raw_cost(const WorkUnit& unit, std::uint32_t unit_index, DeviceId device, const Rect& rect,
                       const CacheState& cache, std::uint64_t dtype_bytes, const CostAdjust& adjust);

/// Parallelism bound for a level whose indivisible items are single tiles of
/// one block: max(total / sum F, one block / F_max).
double level_lower_bound(const std::vector<WorkUnit>& units, const FleetSpec& fleet);

}  // namespace edgeshard
