// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Heterogeneous edge devices, latency distributions, stragglers and churn.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgeshard/rng.hpp"

namespace edgeshard {

using DeviceId = std::uint32_t;

struct TailModel {
  enum class Kind : std::uint8_t { deterministic, exponential, pareto };
  Kind kind = Kind::deterministic;
  double value = 0;  // constant for deterministic, rate for exponential, x_m for pareto
  double alpha = 0;  // pareto shape

  static TailModel constant(double seconds) { return {Kind::deterministic, seconds, 0}; }
  static TailModel exponential(double rate) { return {Kind::exponential, rate, 0}; }
  static TailModel pareto(double x_m, double alpha) { return {Kind::pareto, x_m, alpha}; }

  void validate() const;
  bool has_finite_mean() const;
  double mean() const;
};

double sample_latency(const TailModel& model, Rng& rng);

struct DeviceSpec {
  DeviceId id = 0;
  double flops = 1;          // FLOP/s
  double ul_bw = 1;          // bytes/s
  double dl_bw = 1;          // bytes/s
  double ul_overhead = 0;    // s
  double dl_overhead = 0;    // s
  double mem_capacity = 1;   // bytes
  TailModel latency;         // extra per-level delay in stochastic simulations

  void validate() const;
};

struct ParameterServerSpec {
  double aggregate_bw = 25e9;  // bytes/s, 200 Gbps
  double update_flops = 4e12;
};

struct FleetSpec {
  std::vector<DeviceSpec> devices;
  ParameterServerSpec ps;

  std::size_t size() const { return devices.size(); }
  void validate() const;
  /// Index into `devices`, or npos.
  std::size_t index_of(DeviceId id) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Piecewise-uniform device population: a fraction of phone-class devices,
/// the rest laptop-class.
struct HeterogeneityProfile {
  double phone_fraction = 0.5;
  double phone_flops_min = 5e12, phone_flops_max = 7e12;
  double laptop_flops_min = 10e12, laptop_flops_max = 27e12;
  double phone_mem = 0.5e9;
  double laptop_mem = 10e9;
  double dl_min = 10e6, dl_max = 100e6;
  double ul_min = 5e6, ul_max = 10e6;
  double ul_overhead = 5e-3;
  double dl_overhead = 5e-3;
  TailModel latency;
  ParameterServerSpec ps;

  static HeterogeneityProfile mixed() { return {}; }
  /// Zero-variance profile: every device identical.
  static HeterogeneityProfile homogeneous(double flops, double dl_bw, double ul_bw, double mem,
                                          double overhead = 5e-3);
};

FleetSpec sample_fleet(const HeterogeneityProfile& profile, std::size_t count, std::uint64_t seed);

/// Divides flops and both bandwidths of floor(fraction*D) seed-chosen devices by `slowdown`.
FleetSpec inject_stragglers(const FleetSpec& fleet, double fraction, double slowdown,
                            std::uint64_t seed);

/// Ids of the devices inject_stragglers would slow down.
std::vector<DeviceId> straggler_ids(const FleetSpec& fleet, double fraction, std::uint64_t seed);

/// Max-min fair share of the PS egress: per-device effective DL rate when all
/// devices download at once.
std::vector<double> effective_dl_bandwidth(const FleetSpec& fleet);

struct ChurnEvent {
  enum class Kind : std::uint8_t { fail, join };
  double time = 0;
  DeviceId device_id = 0;
  Kind kind = Kind::fail;
  DeviceSpec joined;  // for join events
};

struct ChurnTrace {
  std::vector<ChurnEvent> events;

  bool empty() const { return events.empty(); }
  /// Checks ordering, liveness of fail targets and freshness of join ids.
  void validate(const FleetSpec& fleet) const;
};

/// Lines of `time device_id fail|join [key=value ...]`; '#' starts a comment.
/// Join keys: flops, ul_bw, dl_bw, ul_overhead, dl_overhead, mem; unspecified
/// values copy `join_template`.
ChurnTrace parse_churn_trace(const std::string& text, const DeviceSpec& join_template);
ChurnTrace load_churn_trace(const std::string& path, const DeviceSpec& join_template);

}  // namespace edgeshard
