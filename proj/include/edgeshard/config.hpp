// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Scenario configuration: JSON parsing, validation and built-in presets.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "edgeshard/baselines.hpp"
#include "edgeshard/fleet.hpp"
#include "edgeshard/model_dag.hpp"
#include "edgeshard/scheduler.hpp"
#include "edgeshard/simulator.hpp"

namespace edgeshard {

/// llama-7b, llama-13b, llama-70b, opt-13b, tiny.
ModelConfig model_preset(const std::string& name);
std::vector<std::string> model_preset_names();

struct FleetConfig {
  std::string profile = "mixed";   // mixed | homogeneous | phones | explicit
  std::size_t devices = 8;
  HeterogeneityProfile params;     // ranges for mixed/phones, constants for homogeneous
  std::vector<DeviceSpec> explicit_devices;
  double straggler_fraction = 0;
  double straggler_slowdown = 10;
};

FleetSpec build_fleet(const FleetConfig& cfg, std::uint64_t seed);

enum class SweepAxis { none, devices, model_size, batch_size, straggler_fraction, model };

std::string sweep_axis_name(SweepAxis a);

struct SweepConfig {
  SweepAxis axis = SweepAxis::none;
  std::vector<double> values;              // numeric axes
  std::vector<std::string> models;         // model axis
  bool proportional_devices = false;       // scale D with model or batch size
  std::vector<BaselineMode> baselines;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  ModelConfig model = model_preset("tiny");
  TrainConfig train;
  FleetConfig fleet;
  SchedulerOptions scheduler;
  ParallelismConfig parallelism;
  SimConfig sim;
  ChurnTrace churn;
  std::vector<Ablation> ablations;     // extra simulate rows, one per mode
  std::vector<double> volume_devices;  // D values for volume curves
  std::vector<std::string> analyses;   // volumes, crossovers, tail_table, tail_formulas, recovery, baselines
  std::uint64_t mc_samples = 100000;
  SweepConfig sweep;

  void validate() const;
};

/// Unknown keys, wrong types and out-of-range values raise ConfigError
/// naming the offending field.
Scenario parse_scenario(const std::string& json_text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

Scenario preset_scenario(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace edgeshard
