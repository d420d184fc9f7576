// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exhaustive search over guillotine tilings for tiny instances. Used as an
// independent check of the scheduler.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "edgeshard/fleet.hpp"
#include "edgeshard/scheduler.hpp"

namespace edgeshard {

inline constexpr std::uint64_t kOracleMaxDim = 12;
inline constexpr std::size_t kOracleMaxDevices = 4;

/// Seconds for device `k` to own `rect`; infinity when infeasible.
using TileCostFn = std::function<double(std::size_t k, const Rect& rect)>;

/// Optimal makespan over every guillotine tiling of `region` at unit
/// granularity and every assignment of the devices to tiles (devices may idle).
double guillotine_optimum(const Rect& region, std::size_t devices, const TileCostFn& cost);

/// Optimum for one GEMM under the scheduler's cost model. Rejects m or q
/// above 12 and fleets above 4 devices.
double brute_force_oracle(const GemmShape& shape, const FleetSpec& fleet, std::uint64_t dtype_bytes,
                          const SchedulerOptions& opt = {});
double brute_force_oracle(const GemmNode& gemm, const FleetSpec& fleet, std::uint64_t dtype_bytes,
                          const SchedulerOptions& opt = {});

/// Optimal cache-aware re-tiling of a single failed tile over the survivors.
double brute_force_patch_oracle(const LevelPlan& level, const CacheState& cache, DeviceId failed,
                                const FleetSpec& live, std::uint64_t dtype_bytes,
                                const SchedulerOptions& opt = {});

}  // namespace edgeshard
