// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic volume and runtime models for DP/PP/TP baselines, the hybrid
// tensor-parallel volume formulas, crossover device counts and recovery
// models for conventional fault handling.

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "edgeshard/fleet.hpp"
#include "edgeshard/model_dag.hpp"

namespace edgeshard {

struct ParallelismConfig {
  std::uint64_t tp_degree = 1;    // t
  std::uint64_t pp_stages = 1;    // p
  std::uint64_t dp_replicas = 1;  // B / microbatch

  std::uint64_t devices() const { return tp_degree * pp_stages * dp_replicas; }
  void validate(const ModelConfig& model) const;
};

struct VolumeReport {
  double per_device_ul = 0;  // bytes
  double per_device_dl = 0;  // bytes
  double total = 0;          // bytes; see baseline_volume / hybrid_volume
  double dp_allreduce = 0;
  double pp_activations = 0;
  double tp_allreduce = 0;
};

/// Per-device volume of conventional 3D parallelism, symmetric in UL and DL.
/// `total` is the per-device sum of the three components.
VolumeReport baseline_volume(const ModelConfig& model, const TrainConfig& train, const ParallelismConfig& par,
                             std::uint64_t dtype_bytes = 2);

/// Hybrid tensor-parallel PS volumes for one batch. `total` is the fleet-wide
/// DL plus UL; per-device values are the totals divided by D.
VolumeReport hybrid_volume(const ModelConfig& model, const TrainConfig& train, std::uint64_t devices,
                           std::uint64_t dtype_bytes = 2);

/// Fleet-wide DL and UL element counts (multiply by dtype bytes).
double hybrid_dl_elements(const ModelConfig& model, const TrainConfig& train);
double hybrid_ul_elements(const ModelConfig& model, const TrainConfig& train);

/// Thresholds of the downlink and uplink crossover conditions (derived for H = 4h).
double crossover_downlink_threshold(const ModelConfig& model, const TrainConfig& train, std::uint64_t t);
double crossover_uplink_threshold(const ModelConfig& model, const TrainConfig& train, std::uint64_t t);
/// Smallest integer D strictly above the threshold; 0 when there are no layers.
std::uint64_t crossover_downlink(const ModelConfig& model, const TrainConfig& train, std::uint64_t t);
std::uint64_t crossover_uplink(const ModelConfig& model, const TrainConfig& train, std::uint64_t t);

struct TightenedParams {
  double pairs_per_level = 1;  // W: row-column pairs per level
  double levels = 1;           // S
  double t_dl = 0;             // per pair, seconds
  double t_comp = 0;
  double t_ul = 0;
  double alpha_lat = 5e-3;     // per-message latency
  double beta_bw = 1.0;
  double v_baseline = 0;       // per-device baseline bytes
  double dl_bw = 1;            // bytes/s
  std::uint64_t d_max = 100000000;

  void validate() const;
};

/// Smallest D satisfying the pipelined crossover condition, by integer scan;
/// nullopt when none exists up to d_max.
std::optional<std::uint64_t> tightened_crossover(const TightenedParams& p);

/// Tightened-crossover inputs for a model on a representative device: W is
/// the mean output elements per DAG level, per-pair times are one row and one
/// column down, 2n FLOPs, one element up.
TightenedParams tightened_params(const ModelConfig& model, const TrainConfig& train, std::uint64_t t,
                                 const DeviceSpec& device, std::uint64_t dtype_bytes = 2);

enum class BaselineMode { alpa_like, dtfm_like };

std::string baseline_name(BaselineMode m);

struct BaselineRun {
  double runtime = 0;       // synchronous step time
  double max_compute = 0;
  double max_comm = 0;
  double per_device_volume = 0;  // bytes each way
};

/// Synchronous step model. alpa_like: even FLOP share and even volume per
/// device. dtfm_like: pp stages with layers balanced by stage FLOPS, DP
/// AllReduce inside each stage.
BaselineRun baseline_runtime(const ModelConfig& model, const TrainConfig& train, const ParallelismConfig& par,
                             const FleetSpec& fleet, BaselineMode mode, std::uint64_t dtype_bytes = 2);

/// Replacement device downloads one layer of activations plus that layer's
/// training state.
double checkpoint_restore_recovery(const ModelConfig& model, const TrainConfig& train, const DeviceSpec& device,
                                   std::uint64_t dtype_bytes = 2, double restart_overhead = 0);

/// One device recomputes a full layer forward and receives its hidden states.
double layer_recompute_recovery(const ModelConfig& model, const TrainConfig& train, const DeviceSpec& device,
                                std::uint64_t dtype_bytes = 2);

}  // namespace edgeshard
