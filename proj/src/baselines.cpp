// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "edgeshard/errors.hpp"

namespace edgeshard {

namespace {

struct Dims {
  double h, H, s, B, L, a;
};

Dims dims(const ModelConfig& m, const TrainConfig& t) {
  return {static_cast<double>(m.hidden_dim), static_cast<double>(m.intermediate_dim),
          static_cast<double>(t.seq_len),    static_cast<double>(t.batch_size),
          static_cast<double>(m.num_layers), static_cast<double>(m.num_heads)};
}

void check_train(const TrainConfig& t) {
  if (t.batch_size == 0) throw ConfigError("train.batch_size", "must be >= 1");
  if (t.seq_len == 0) throw ConfigError("train.seq_len", "must be >= 1");
}

double total_step_flops(const ModelConfig& model, const TrainConfig& train) {
  const auto dag = build_gemm_dag(model, train);
  const auto f = total_flops(dag, model, train);
  return f.gemm_flops + f.nongemm_flops_estimate;
}

}  // namespace

void ParallelismConfig::validate(const ModelConfig& model) const {
  if (tp_degree == 0) throw ConfigError("parallelism.tp_degree", "must be >= 1");
  if (pp_stages == 0) throw ConfigError("parallelism.pp_stages", "must be >= 1");
  if (dp_replicas == 0) throw ConfigError("parallelism.dp_replicas", "must be >= 1");
  if (pp_stages > model.num_layers) {
    throw ConfigError("parallelism.pp_stages",
                      fmt::format("{} stages exceed {} layers", pp_stages, model.num_layers));
  }
}

VolumeReport baseline_volume(const ModelConfig& model, const TrainConfig& train, const ParallelismConfig& par,
                             std::uint64_t dtype_bytes) {
  par.validate(model);
  check_train(train);
  const auto d = dims(model, train);
  const double b = static_cast<double>(dtype_bytes);
  const double t = static_cast<double>(par.tp_degree), p = static_cast<double>(par.pp_stages);
  VolumeReport v;
  // Gradients of the layers this device holds, one AllReduce per batch.
  v.dp_allreduce = static_cast<double>(layer_parameter_count(model)) * (d.L / p) / t * b;
  v.pp_activations = par.pp_stages > 1 ? 2.0 * d.B * d.s * d.h * b : 0.0;
  v.tp_allreduce = par.tp_degree > 1 ? 2.0 * d.B * d.s * d.h * b : 0.0;
  v.total = v.dp_allreduce + v.pp_activations + v.tp_allreduce;
  v.per_device_ul = v.total;
  v.per_device_dl = v.total;
  return v;
}

double hybrid_dl_elements(const ModelConfig& model, const TrainConfig& train) {
  check_train(train);
  const auto d = dims(model, train);
  return (8 * d.B * d.s * d.h * d.h + 18 * d.B * d.s * d.h * d.H + 4 * d.B * d.s * d.s * d.h) * d.L;
}

double hybrid_ul_elements(const ModelConfig& model, const TrainConfig& train) {
  check_train(train);
  const auto d = dims(model, train);
  return ((4 * d.h * d.h + 3 * d.h * d.H) + d.B * d.s * d.h + 2 * d.B * d.s * d.H + 5 * d.B * d.s * d.h +
          d.B * d.s * d.s * d.h) *
         d.L;
}

VolumeReport hybrid_volume(const ModelConfig& model, const TrainConfig& train, std::uint64_t devices,
                           std::uint64_t dtype_bytes) {
  if (devices == 0) throw ConfigError("devices", "must be >= 1");
  const double b = static_cast<double>(dtype_bytes), D = static_cast<double>(devices);
  VolumeReport v;
  const double dl = hybrid_dl_elements(model, train) * b;
  const double ul = hybrid_ul_elements(model, train) * b;
  v.total = dl + ul;
  v.per_device_dl = dl / D;
  v.per_device_ul = ul / D;
  return v;
}

double crossover_downlink_threshold(const ModelConfig& model, const TrainConfig& train, std::uint64_t t) {
  check_train(train);
  if (t == 0) throw ConfigError("parallelism.tp_degree", "must be >= 1");
  const auto d = dims(model, train);
  return 3 * (80 + 4 * d.s) * d.L / (16 * d.h / (static_cast<double>(t) * d.B * d.s) + 4);
}

double crossover_uplink_threshold(const ModelConfig& model, const TrainConfig& train, std::uint64_t t) {
  check_train(train);
  if (t == 0) throw ConfigError("parallelism.tp_degree", "must be >= 1");
  const auto d = dims(model, train);
  return (8 * d.h / (d.B * d.s) + 13 + d.s) * d.L / (8 * d.h / (static_cast<double>(t) * d.B * d.s) + 2);
}

namespace {
std::uint64_t above(double threshold) {
  if (threshold <= 0) return 0;
  return static_cast<std::uint64_t>(std::floor(threshold)) + 1;
}
}  // namespace

std::uint64_t crossover_downlink(const ModelConfig& model, const TrainConfig& train, std::uint64_t t) {
  if (model.num_layers == 0) return 0;
  return above(crossover_downlink_threshold(model, train, t));
}

std::uint64_t crossover_uplink(const ModelConfig& model, const TrainConfig& train, std::uint64_t t) {
  if (model.num_layers == 0) return 0;
  return above(crossover_uplink_threshold(model, train, t));
}

void TightenedParams::validate() const {
  if (!(pairs_per_level > 0)) throw ConfigError("tightened.pairs_per_level", "must be > 0");
  if (!(levels > 0)) throw ConfigError("tightened.levels", "must be > 0");
  if (t_dl < 0 || t_comp < 0 || t_ul < 0) throw ConfigError("tightened.t", "per-pair times must be >= 0");
  if (!(alpha_lat > 0)) throw ConfigError("tightened.alpha_lat", "must be > 0");
  if (!(beta_bw > 0)) throw ConfigError("tightened.beta_bw", "must be > 0");
  if (v_baseline < 0) throw ConfigError("tightened.v_baseline", "must be >= 0");
  if (!(dl_bw > 0)) throw ConfigError("tightened.dl_bw", "must be > 0");
  if (d_max == 0) throw ConfigError("tightened.d_max", "must be >= 1");
}

std::optional<std::uint64_t> tightened_crossover(const TightenedParams& p) {
  p.validate();
  const double slow = std::max({p.t_dl, p.t_comp, p.t_ul});
  for (std::uint64_t D = 1; D <= p.d_max; ++D) {
    const double k = std::ceil(p.pairs_per_level / static_cast<double>(D));
    const double pipe = p.t_dl + (k - 1) * slow + p.t_comp + p.t_ul;
    const double logd = std::max(1.0, std::ceil(std::log2(static_cast<double>(D))));
    const double denom = p.alpha_lat * logd + p.beta_bw * p.v_baseline / p.dl_bw;
    if (static_cast<double>(D) * denom > p.levels * pipe) return D;
  }
  return std::nullopt;
}

TightenedParams tightened_params(const ModelConfig& model, const TrainConfig& train, std::uint64_t t,
                                 const DeviceSpec& device, std::uint64_t dtype_bytes) {
  const auto dag = build_gemm_dag(model, train);
  double pairs = 0, weighted_n = 0;
  for (const auto& n : dag.nodes) {
    const double out = static_cast<double>(n.m) * static_cast<double>(n.q) * static_cast<double>(n.count);
    pairs += out;
    weighted_n += out * static_cast<double>(n.n_inner);
  }
  const double b = static_cast<double>(dtype_bytes);
  const double n = weighted_n / pairs;
  TightenedParams p;
  p.levels = static_cast<double>(dag.num_levels());
  p.pairs_per_level = pairs / p.levels;
  p.t_dl = 2 * n * b / device.dl_bw;
  p.t_comp = 2 * n / device.flops;
  p.t_ul = b / device.ul_bw;
  p.dl_bw = device.dl_bw;
  ParallelismConfig par;
  par.tp_degree = t;
  p.v_baseline = baseline_volume(model, train, par, dtype_bytes).per_device_dl;
  return p;
}

std::string baseline_name(BaselineMode m) { return m == BaselineMode::alpa_like ? "alpa_like" : "dtfm_like"; }

BaselineRun baseline_runtime(const ModelConfig& model, const TrainConfig& train, const ParallelismConfig& par,
                             const FleetSpec& fleet, BaselineMode mode, std::uint64_t dtype_bytes) {
  par.validate(model);
  fleet.validate();
  if (fleet.size() < par.devices()) {
    throw ConfigError("fleet.devices", fmt::format("{} devices, configuration needs {}", fleet.size(), par.devices()));
  }
  const double work = total_step_flops(model, train);
  const double D = static_cast<double>(fleet.size());
  BaselineRun run;

  auto account = [&](const DeviceSpec& d, double flops, double volume) {
    const double comp = flops / d.flops;
    const double comm = volume / d.ul_bw + volume / d.dl_bw + d.ul_overhead + d.dl_overhead;
    run.max_compute = std::max(run.max_compute, comp);
    run.max_comm = std::max(run.max_comm, comm);
    run.runtime = std::max(run.runtime, comp + comm);
    run.per_device_volume = std::max(run.per_device_volume, volume);
  };

  if (mode == BaselineMode::alpa_like) {
    const double volume = baseline_volume(model, train, par, dtype_bytes).total;
    for (const auto& d : fleet.devices) account(d, work / D, volume);
    return run;
  }

  // Stages are contiguous in device order (the placement is network driven,
  // not compute driven); layers then follow stage FLOPS.
  std::vector<std::size_t> order(fleet.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t p = par.pp_stages;
  std::vector<std::vector<std::size_t>> stages(p);
  const std::size_t base = fleet.size() / p, extra = fleet.size() % p;
  std::size_t next = 0;
  for (std::size_t s = 0; s < p; ++s) {
    const std::size_t n = base + (s < extra ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) stages[s].push_back(order[next++]);
  }
  // Layers follow aggregate stage FLOPS; inside a stage the batch is split
  // evenly, so the slowest replica sets the pace.
  std::vector<double> stage_flops(p, 0.0);
  double all_flops = 0;
  for (std::size_t s = 0; s < p; ++s) {
    for (std::size_t k : stages[s]) stage_flops[s] += fleet.devices[k].flops;
    all_flops += stage_flops[s];
  }
  const std::uint64_t L = model.num_layers;
  std::vector<std::uint64_t> layers(p, 1);
  std::uint64_t assigned = p;
  std::vector<std::pair<double, std::size_t>> remainders;
  for (std::size_t s = 0; s < p; ++s) {
    const double exact = static_cast<double>(L - p) * stage_flops[s] / all_flops;
    const auto whole = static_cast<std::uint64_t>(std::floor(exact));
    layers[s] += whole;
    assigned += whole;
    remainders.push_back({exact - static_cast<double>(whole), s});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t i = 0; assigned < L; ++i, ++assigned) ++layers[remainders[i % p].second];

  const auto d = dims(model, train);
  const double b = static_cast<double>(dtype_bytes);
  const double t = static_cast<double>(par.tp_degree);
  for (std::size_t s = 0; s < p; ++s) {
    const double g = static_cast<double>(stages[s].size());
    const double share = work * static_cast<double>(layers[s]) / d.L / g;
    double volume = static_cast<double>(layer_parameter_count(model)) * static_cast<double>(layers[s]) / t * b;
    if (p > 1) volume += 2.0 * (d.B / g) * d.s * d.h * b;
    if (par.tp_degree > 1) volume += 2.0 * (d.B / g) * d.s * d.h * b;
    // Ring AllReduce moves at the slowest link of the stage.
    double ul = std::numeric_limits<double>::infinity(), dl = ul;
    for (std::size_t k : stages[s]) {
      ul = std::min(ul, fleet.devices[k].ul_bw);
      dl = std::min(dl, fleet.devices[k].dl_bw);
    }
    for (std::size_t k : stages[s]) {
      DeviceSpec link = fleet.devices[k];
      link.ul_bw = ul;
      link.dl_bw = dl;
      account(link, share, volume);
    }
  }
  return run;
}

double checkpoint_restore_recovery(const ModelConfig& model, const TrainConfig& train, const DeviceSpec& device,
                                   std::uint64_t dtype_bytes, double restart_overhead) {
  const auto mem = memory_requirements(model, train);
  const double L = static_cast<double>(model.num_layers);
  const double state = static_cast<double>(layer_parameter_count(model)) * (2.0 * static_cast<double>(dtype_bytes) + 8.0);
  const double bytes = mem.activation_bytes / L + state;
  return restart_overhead + device.dl_overhead + bytes / device.dl_bw;
}

double layer_recompute_recovery(const ModelConfig& model, const TrainConfig& train, const DeviceSpec& device,
                                std::uint64_t dtype_bytes) {
  ModelConfig one = model;
  one.num_layers = 1;
  one.include_lm_head = false;
  const auto dag = build_gemm_dag(one, train);
  double fwd = 0;
  for (const auto& n : dag.nodes)
    if (n.pass == Pass::forward) fwd += n.flops();
  const auto d = dims(model, train);
  const double hidden = d.B * d.s * d.h * static_cast<double>(dtype_bytes);
  return fwd / device.flops + device.dl_overhead + hidden / device.dl_bw;
}

}  // namespace edgeshard
