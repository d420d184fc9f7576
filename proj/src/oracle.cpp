// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/oracle.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "edgeshard/errors.hpp"

namespace edgeshard {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Guillotine {
 public:
  Guillotine(const Rect& region, std::size_t devices, const TileCostFn& cost)
      : base_(region), R_(region.alpha()), C_(region.beta()), D_(devices), cost_(cost),
        memo_((R_ + 1) * (R_ + 1) * (C_ + 1) * (C_ + 1) << devices, -1.0) {}

  double solve() { return best(0, R_, 0, C_, (1u << D_) - 1); }

 private:
  Rect base_;
  std::uint64_t R_, C_;
  std::size_t D_;
  const TileCostFn& cost_;
  std::vector<double> memo_;

  double best(std::uint64_t r0, std::uint64_t r1, std::uint64_t c0, std::uint64_t c1, std::uint32_t mask) {
    const std::size_t key = ((((r0 * (R_ + 1) + r1) * (C_ + 1) + c0) * (C_ + 1) + c1) << D_) | mask;
    if (memo_[key] >= 0) return memo_[key];
    double v = kInf;
    const Rect rect{base_.r0 + r0, base_.r0 + r1, base_.c0 + c0, base_.c0 + c1};
    for (std::size_t k = 0; k < D_; ++k)
      if ((mask >> k) & 1u) v = std::min(v, cost_(k, rect));
    // Split the devices between the two sides of every cut.
    for (std::uint32_t a = (mask - 1) & mask; a != 0; a = (a - 1) & mask) {
      const std::uint32_t b = mask ^ a;
      for (std::uint64_t r = r0 + 1; r < r1; ++r) {
        const double top = best(r0, r, c0, c1, a);
        if (top >= v) continue;
        v = std::min(v, std::max(top, best(r, r1, c0, c1, b)));
      }
      for (std::uint64_t c = c0 + 1; c < c1; ++c) {
        const double left = best(r0, r1, c0, c, a);
        if (left >= v) continue;
        v = std::min(v, std::max(left, best(r0, r1, c, c1, b)));
      }
    }
    memo_[key] = v;
    return v;
  }
};

void check_size(std::uint64_t rows, std::uint64_t cols, std::size_t devices) {
  if (rows > kOracleMaxDim || cols > kOracleMaxDim) {
    throw ConfigError("oracle", fmt::format("instance {}x{} exceeds {}x{}", rows, cols, kOracleMaxDim, kOracleMaxDim));
  }
  if (devices == 0 || devices > kOracleMaxDevices) {
    throw ConfigError("oracle", fmt::format("{} devices outside 1..{}", devices, kOracleMaxDevices));
  }
}

}  // namespace

double guillotine_optimum(const Rect& region, std::size_t devices, const TileCostFn& cost) {
  check_size(region.alpha(), region.beta(), devices);
  return Guillotine(region, devices, cost).solve();
}

double brute_force_oracle(const GemmShape& shape, const FleetSpec& fleet, std::uint64_t dtype_bytes,
                          const SchedulerOptions& opt) {
  check_size(shape.rows, shape.cols, fleet.size());
  const auto rates = scheduler_rates(fleet, opt);
  return guillotine_optimum({0, shape.rows, 0, shape.cols}, fleet.size(), [&](std::size_t k, const Rect& r) {
    const RawCost raw = raw_cost(shape, r, dtype_bytes, opt.adjust);
    if (raw.mem_bytes > rates[k].mem_capacity) return kInf;
    return combine(raw, rates[k]).gemm_cost;
  });
}

double brute_force_oracle(const GemmNode& gemm, const FleetSpec& fleet, std::uint64_t dtype_bytes,
                          const SchedulerOptions& opt) {
  return brute_force_oracle(shape_of(gemm), fleet, dtype_bytes, opt);
}

double brute_force_patch_oracle(const LevelPlan& level, const CacheState& cache, DeviceId failed,
                                const FleetSpec& live, std::uint64_t dtype_bytes, const SchedulerOptions& opt) {
  const Assignment* lost = nullptr;
  for (const auto& a : level.assignments) {
    if (a.device != failed) continue;
    if (lost) throw ConfigError("oracle", "patch oracle supports a single failed tile");
    lost = &a;
  }
  if (!lost) return 0.0;
  FleetSpec survivors = live;
  std::erase_if(survivors.devices, [&](const DeviceSpec& d) { return d.id == failed; });
  auto rates = scheduler_rates(survivors, opt);
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    if (const auto* dc = level.device_cost(survivors.devices[k].id)) rates[k].mem_capacity -= dc->raw.mem_bytes;
  }
  const auto& unit = level.units[lost->unit];
  return guillotine_optimum(lost->rect, survivors.size(), [&](std::size_t k, const Rect& r) {
    const RawCost raw =
        patch_raw_cost(unit, lost->unit, survivors.devices[k].id, r, cache, dtype_bytes, opt.adjust);
    if (raw.mem_bytes > rates[k].mem_capacity) return kInf;
    return combine(raw, rates[k]).gemm_cost;
  });
}

}  // namespace edgeshard
