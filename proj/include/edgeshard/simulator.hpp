// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-device, per-level execution of a SchedulePlan. Each device streams its
// row/column blocks through DL, compute and UL; a barrier closes every level.

#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "edgeshard/fleet.hpp"
#include "edgeshard/model_dag.hpp"
#include "edgeshard/scheduler.hpp"

namespace edgeshard {

enum class LatencyMode { deterministic, stochastic };
enum class Ablation { no_tp, no_ps, no_heterogeneity };

std::string ablation_name(Ablation a);
Ablation parse_ablation(const std::string& s);

struct SimConfig {
  LatencyMode latency_mode = LatencyMode::deterministic;
  std::uint64_t seed = 0;
  std::set<Ablation> ablation;
  ChurnTrace churn;
  bool verify_outputs = false;
  // Model parameters held by the PS; drives the optimizer update cost.
  double parameter_count = 0;
  // FLOPs per parameter for one optimizer step on the PS.
  double update_flops_per_param = 10.0;

  void validate(const FleetSpec& fleet) const;
};

struct DeviceStats {
  DeviceId device = 0;
  double peak_mem = 0;   // bytes
  double ul_volume = 0;  // bytes
  double dl_volume = 0;  // bytes
  double busy_time = 0;  // seconds
};

struct RecoveryEvent {
  DeviceId device = 0;
  std::size_t level = 0;
  double fail_time = 0;
  double recovery_time = 0;
  double failed_area = 0;
  double patched_area = 0;
};

struct SimResult {
  double batch_runtime = 0;
  std::vector<DeviceStats> per_device;  // fleet order, joined devices appended
  std::vector<double> level_times;      // barrier-to-barrier
  std::vector<double> barrier_waits;    // T_sync per level: slowest minus mean device time
  double ps_update_time = 0;            // optimizer step on the PS
  double ps_update_exposed = 0;         // part not hidden behind backward levels
  std::vector<RecoveryEvent> recovery_events;
  std::size_t verified_units = 0;
  std::size_t verification_failures = 0;

  const DeviceStats* stats(DeviceId id) const;
  double max_peak_mem() const;
  double max_ul_volume() const;
};

/// T_DL + (k-1)*max(T_DL, T_comp, T_UL) + T_comp + T_UL for k pairs.
double pipeline_time(double t_dl, double t_comp, double t_ul, std::uint64_t k);

SimResult simulate_batch(const SchedulePlan& plan, const FleetSpec& fleet, const SimConfig& sim = {});

/// Failures are patched on survivors from the failure instant; later levels are
/// re-planned for the live set. Joins take effect at the next level boundary.
SimResult simulate_with_churn(const SchedulePlan& plan, const FleetSpec& fleet, const ChurnTrace& churn,
                              const SimConfig& sim = {});

/// Per device (fleet order), the largest level working set in bytes.
std::vector<double> peak_memory(const SchedulePlan& plan, const FleetSpec& fleet);

/// Schedules and simulates `dag` with one ablation applied.
SimResult run_ablation(const GemmDag& dag, const FleetSpec& fleet, Ablation mode, std::uint64_t dtype_bytes,
                       const SimConfig& sim = {}, const SchedulerOptions& base = {});

/// Options that realize a set of ablations on top of `base`.
SchedulerOptions ablation_options(const SchedulerOptions& base, const std::set<Ablation>& modes,
                                  double parameter_count, std::size_t devices);

// Random-projection product check.

inline constexpr std::uint64_t kVerifyPrime = (1ull << 61) - 1;

struct IntMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<std::uint64_t> data;  // entries mod kVerifyPrime, row-major

  IntMatrix() = default;
  IntMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}
  std::uint64_t& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  std::uint64_t at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct RealMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  RealMatrix() = default;
  RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

IntMatrix random_int_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
IntMatrix multiply(const IntMatrix& a, const IntMatrix& b);
RealMatrix multiply(const RealMatrix& a, const RealMatrix& b);

/// Accepts iff r^T C s == (r^T A)(B s) for every trial. Exact over the
/// prime field for IntMatrix; relative tolerance 1e-6 for RealMatrix.
bool verify_gemm_output(const IntMatrix& a, const IntMatrix& b, const IntMatrix& c, int trials,
                        std::mt19937_64& rng);
bool verify_gemm_output(const RealMatrix& a, const RealMatrix& b, const RealMatrix& c, int trials,
                        std::mt19937_64& rng);

}  // namespace edgeshard
