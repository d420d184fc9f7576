// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "edgeshard/errors.hpp"
#include "json.hpp"

namespace edgeshard {

using nlohmann::json;

namespace {

std::string dotted(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

/// Object reader that remembers which keys were used and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  Reader object(const std::string& key) { return Reader(raw(key), field(key)); }

  std::string field(const std::string& key) const { return dotted(path_, key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(field(key), "expected a boolean");
        out = v.get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
        out = v.get<std::string>();
      } else if constexpr (std::is_integral_v<T>) {
        if (v.is_number_unsigned()) {
          out = static_cast<T>(v.get<std::uint64_t>());
        } else if (v.is_number_float() && v.get<double>() >= 0 && std::floor(v.get<double>()) == v.get<double>() &&
                   v.get<double>() < 1.8e19) {
          out = static_cast<T>(v.get<double>());
        } else {
          throw ConfigError(field(key), "expected a non-negative integer");
        }
      } else {
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
        out = v.get<double>();
      }
    } catch (const json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  std::vector<double> numbers(const std::string& key) {
    std::vector<double> out;
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of numbers");
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(field(key), "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key) {
    std::vector<std::string> out;
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of strings");
    for (const auto& x : v) {
      if (!x.is_string()) throw ConfigError(field(key), "expected an array of strings");
      out.push_back(x.get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

ModelConfig make_model(std::string name, std::uint64_t L, std::uint64_t h, std::uint64_t H, std::uint64_t a,
                       std::uint64_t V, bool gated) {
  ModelConfig m;
  m.name = std::move(name);
  m.num_layers = L;
  m.hidden_dim = h;
  m.intermediate_dim = H;
  m.num_heads = a;
  m.vocab_size = V;
  m.gated_mlp = gated;
  return m;
}

TailModel read_latency(Reader r) {
  std::string kind = "constant";
  r.get("kind", kind);
  TailModel t;
  if (kind == "constant") {
    double v = 0;
    r.get("value", v);
    t = TailModel::constant(v);
  } else if (kind == "exponential") {
    double rate = 1;
    r.get("rate", rate);
    t = TailModel::exponential(rate);
  } else if (kind == "pareto") {
    double x_m = 1, alpha = 2;
    r.get("x_m", x_m);
    r.get("alpha", alpha);
    t = TailModel::pareto(x_m, alpha);
  } else {
    throw ConfigError(r.field("kind"), "expected constant, exponential or pareto");
  }
  r.finish();
  t.validate();
  return t;
}

void read_device(Reader& r, DeviceSpec& d) {
  r.get("id", d.id);
  r.get("flops", d.flops);
  r.get("ul_bw", d.ul_bw);
  r.get("dl_bw", d.dl_bw);
  r.get("ul_overhead", d.ul_overhead);
  r.get("dl_overhead", d.dl_overhead);
  r.get("mem_capacity", d.mem_capacity);
  if (r.has("latency")) d.latency = read_latency(r.object("latency"));
}

void read_model(Reader r, ModelConfig& m) {
  if (r.has("preset")) {
    std::string preset;
    r.get("preset", preset);
    try {
      m = model_preset(preset);
    } catch (const ConfigError& e) {
      throw ConfigError(r.field("preset"), e.what());
    }
  }
  r.get("name", m.name);
  r.get("num_layers", m.num_layers);
  r.get("hidden_dim", m.hidden_dim);
  r.get("intermediate_dim", m.intermediate_dim);
  r.get("num_heads", m.num_heads);
  r.get("vocab_size", m.vocab_size);
  r.get("dtype_bytes", m.dtype_bytes);
  r.get("gated_mlp", m.gated_mlp);
  r.get("include_lm_head", m.include_lm_head);
  r.finish();
}

void read_fleet(Reader r, FleetConfig& f) {
  r.get("profile", f.profile);
  if (f.profile == "homogeneous") {
    double flops = 5e12, dl = 50e6, ul = 8e6, mem = 4e9, overhead = 5e-3;
    r.get("flops", flops);
    r.get("dl_bw", dl);
    r.get("ul_bw", ul);
    r.get("mem", mem);
    r.get("overhead", overhead);
    const auto ps = f.params.ps;
    f.params = HeterogeneityProfile::homogeneous(flops, dl, ul, mem, overhead);
    f.params.ps = ps;
  } else if (f.profile == "mixed" || f.profile == "phones") {
    auto& p = f.params;
    if (f.profile == "phones") p.phone_fraction = 1;
    r.get("phone_fraction", p.phone_fraction);
    r.get("phone_flops_min", p.phone_flops_min);
    r.get("phone_flops_max", p.phone_flops_max);
    r.get("laptop_flops_min", p.laptop_flops_min);
    r.get("laptop_flops_max", p.laptop_flops_max);
    r.get("phone_mem", p.phone_mem);
    r.get("laptop_mem", p.laptop_mem);
    r.get("dl_min", p.dl_min);
    r.get("dl_max", p.dl_max);
    r.get("ul_min", p.ul_min);
    r.get("ul_max", p.ul_max);
    r.get("ul_overhead", p.ul_overhead);
    r.get("dl_overhead", p.dl_overhead);
  } else if (f.profile == "explicit") {
    const json& list = r.raw("list");
    if (!list.is_array() || list.empty()) throw ConfigError(r.field("list"), "expected a nonempty array of devices");
    f.explicit_devices.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      Reader d(list[i], fmt::format("{}[{}]", r.field("list"), i));
      DeviceSpec spec;
      spec.id = static_cast<DeviceId>(i);
      read_device(d, spec);
      d.finish();
      f.explicit_devices.push_back(spec);
    }
    f.devices = f.explicit_devices.size();
  } else {
    throw ConfigError(r.field("profile"), "expected mixed, phones, homogeneous or explicit");
  }
  if (f.profile != "explicit") r.get("devices", f.devices);
  if (r.has("latency")) f.params.latency = read_latency(r.object("latency"));
  if (r.has("ps")) {
    Reader ps = r.object("ps");
    ps.get("aggregate_bw", f.params.ps.aggregate_bw);
    ps.get("update_flops", f.params.ps.update_flops);
    ps.finish();
  }
  if (r.has("stragglers")) {
    Reader s = r.object("stragglers");
    s.get("fraction", f.straggler_fraction);
    s.get("slowdown", f.straggler_slowdown);
    s.finish();
  }
  r.finish();
}

ChurnTrace read_churn(Reader r, const std::string& base_dir, const DeviceSpec& join_template) {
  ChurnTrace trace;
  if (r.has("trace")) {
    std::string path;
    r.get("trace", path);
    std::filesystem::path p(path);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    try {
      trace = load_churn_trace(p.string(), join_template);
    } catch (const ConfigError& e) {
      throw ConfigError(r.field("trace"), e.what());
    }
  }
  if (r.has("events")) {
    const json& ev = r.raw("events");
    if (!ev.is_array()) throw ConfigError(r.field("events"), "expected an array");
    for (std::size_t i = 0; i < ev.size(); ++i) {
      Reader e(ev[i], fmt::format("{}[{}]", r.field("events"), i));
      ChurnEvent c;
      std::string kind = "fail";
      e.get("time", c.time);
      e.get("device", c.device_id);
      e.get("kind", kind);
      if (kind == "fail") {
        c.kind = ChurnEvent::Kind::fail;
      } else if (kind == "join") {
        c.kind = ChurnEvent::Kind::join;
        c.joined = join_template;
        read_device(e, c.joined);
        c.joined.id = c.device_id;
      } else {
        throw ConfigError(e.field("kind"), "expected fail or join");
      }
      e.finish();
      trace.events.push_back(c);
    }
  }
  r.finish();
  return trace;
}

SweepAxis parse_axis(const std::string& s, const std::string& field) {
  for (auto a : {SweepAxis::none, SweepAxis::devices, SweepAxis::model_size, SweepAxis::batch_size,
                 SweepAxis::straggler_fraction, SweepAxis::model})
    if (sweep_axis_name(a) == s) return a;
  throw ConfigError(field, "unknown sweep axis '" + s + "'");
}

BaselineMode parse_baseline(const std::string& s, const std::string& field) {
  if (s == "alpa_like") return BaselineMode::alpa_like;
  if (s == "dtfm_like") return BaselineMode::dtfm_like;
  throw ConfigError(field, "unknown baseline '" + s + "'");
}

const std::set<std::string> kAnalyses = {"volumes", "crossovers", "tail_table", "tail_formulas", "recovery",
                                         "baselines"};

DeviceSpec representative_device(const FleetConfig& f) {
  if (!f.explicit_devices.empty()) return f.explicit_devices.front();
  DeviceSpec d;
  d.flops = f.params.laptop_flops_min;
  d.dl_bw = f.params.dl_max;
  d.ul_bw = f.params.ul_max;
  d.dl_overhead = f.params.dl_overhead;
  d.ul_overhead = f.params.ul_overhead;
  d.mem_capacity = f.params.laptop_mem;
  return d;
}

}  // namespace

ModelConfig model_preset(const std::string& name) {
  if (name == "llama-7b") return make_model(name, 32, 4096, 11008, 32, 32000, true);
  if (name == "llama-13b") return make_model(name, 40, 5120, 13824, 40, 32000, true);
  if (name == "llama-70b") return make_model(name, 80, 8192, 28672, 64, 32000, true);
  if (name == "opt-13b") return make_model(name, 40, 5120, 20480, 40, 50272, false);
  if (name == "tiny") return make_model(name, 1, 8, 16, 2, 0, true);
  throw ConfigError("model.preset", fmt::format("unknown model preset '{}'", name));
}

std::vector<std::string> model_preset_names() { return {"llama-7b", "llama-13b", "llama-70b", "opt-13b", "tiny"}; }

FleetSpec build_fleet(const FleetConfig& cfg, std::uint64_t seed) {
  FleetSpec fleet;
  if (cfg.profile == "explicit") {
    fleet.devices = cfg.explicit_devices;
    fleet.ps = cfg.params.ps;
  } else {
    fleet = sample_fleet(cfg.params, cfg.devices, seed);
  }
  if (cfg.straggler_fraction > 0)
    fleet = inject_stragglers(fleet, cfg.straggler_fraction, cfg.straggler_slowdown, derive_seed(seed, 7));
  fleet.validate();
  return fleet;
}

std::string sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::none: return "none";
    case SweepAxis::devices: return "devices";
    case SweepAxis::model_size: return "model_size";
    case SweepAxis::batch_size: return "batch_size";
    case SweepAxis::straggler_fraction: return "straggler_fraction";
    case SweepAxis::model: return "model";
  }
  return "none";
}

void Scenario::validate() const {
  if (name.empty() || name.find_first_of("/\\ ") != std::string::npos)
    throw ConfigError("name", "must be nonempty without spaces or slashes");
  model.validate();
  train.validate();
  if (fleet.devices == 0) throw ConfigError("fleet.devices", "must be >= 1");
  if (!(fleet.straggler_fraction >= 0 && fleet.straggler_fraction <= 1))
    throw ConfigError("fleet.stragglers.fraction", "must be in [0, 1]");
  if (!(fleet.straggler_slowdown >= 1)) throw ConfigError("fleet.stragglers.slowdown", "must be >= 1");
  if (scheduler.block == 0) throw ConfigError("scheduler.block", "must be >= 1");
  parallelism.validate(model);
  for (const auto& a : analyses)
    if (!kAnalyses.count(a)) throw ConfigError("analyses", "unknown analysis '" + a + "'");
  for (double d : volume_devices)
    if (!(d >= 1) || std::floor(d) != d) throw ConfigError("volume_devices", "entries must be integers >= 1");
  if (mc_samples == 0) throw ConfigError("mc_samples", "must be >= 1");
  switch (sweep.axis) {
    case SweepAxis::none: break;
    case SweepAxis::model:
      if (sweep.models.empty()) throw ConfigError("sweep.models", "model sweep needs at least one model");
      for (const auto& m : sweep.models) model_preset(m);
      break;
    default:
      if (sweep.values.empty()) throw ConfigError("sweep.values", "sweep needs at least one value");
      for (double v : sweep.values) {
        if (sweep.axis == SweepAxis::straggler_fraction ? !(v >= 0 && v <= 1) : !(v > 0))
          throw ConfigError("sweep.values", fmt::format("value {} out of range", v));
        if (sweep.axis == SweepAxis::devices && std::floor(v) != v)
          throw ConfigError("sweep.values", "device counts must be integers");
      }
  }
}

Scenario parse_scenario(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<config>", std::string("malformed JSON: ") + e.what());
  }
  Scenario s;
  Reader r(j, "");
  r.get("name", s.name);
  r.get("seed", s.seed);
  if (r.has("model")) read_model(r.object("model"), s.model);
  if (r.has("train")) {
    Reader t = r.object("train");
    t.get("batch_size", s.train.batch_size);
    t.get("seq_len", s.train.seq_len);
    t.get("microbatch_size", s.train.microbatch_size);
    t.finish();
  }
  if (r.has("fleet")) read_fleet(r.object("fleet"), s.fleet);
  if (r.has("scheduler")) {
    Reader o = r.object("scheduler");
    o.get("block", s.scheduler.block);
    o.get("refine", s.scheduler.refine);
    o.get("rel_tol", s.scheduler.rel_tol);
    o.get("max_iter", s.scheduler.max_iter);
    o.finish();
  }
  if (r.has("parallelism")) {
    Reader p = r.object("parallelism");
    p.get("tp", s.parallelism.tp_degree);
    p.get("pp", s.parallelism.pp_stages);
    p.get("dp", s.parallelism.dp_replicas);
    p.finish();
  }
  if (r.has("sim")) {
    Reader o = r.object("sim");
    std::string mode = "deterministic";
    o.get("latency_mode", mode);
    if (mode == "deterministic") {
      s.sim.latency_mode = LatencyMode::deterministic;
    } else if (mode == "stochastic") {
      s.sim.latency_mode = LatencyMode::stochastic;
    } else {
      throw ConfigError(o.field("latency_mode"), "expected deterministic or stochastic");
    }
    o.get("verify_outputs", s.sim.verify_outputs);
    o.get("update_flops_per_param", s.sim.update_flops_per_param);
    if (o.has("ablations")) {
      for (const auto& a : o.strings("ablations")) {
        try {
          s.ablations.push_back(parse_ablation(a));
        } catch (const ConfigError& e) {
          throw ConfigError(o.field("ablations"), e.what());
        }
      }
    }
    o.finish();
  }
  if (r.has("churn")) s.churn = read_churn(r.object("churn"), base_dir, representative_device(s.fleet));
  if (r.has("volume_devices")) s.volume_devices = r.numbers("volume_devices");
  if (r.has("analyses")) s.analyses = r.strings("analyses");
  r.get("mc_samples", s.mc_samples);
  if (r.has("sweep")) {
    Reader w = r.object("sweep");
    std::string axis = "none";
    w.get("axis", axis);
    s.sweep.axis = parse_axis(axis, w.field("axis"));
    if (w.has("values")) s.sweep.values = w.numbers("values");
    if (w.has("models")) s.sweep.models = w.strings("models");
    w.get("proportional_devices", s.sweep.proportional_devices);
    if (w.has("baselines"))
      for (const auto& b : w.strings("baselines")) s.sweep.baselines.push_back(parse_baseline(b, w.field("baselines")));
    w.finish();
  }
  r.finish();
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), std::filesystem::path(path).parent_path().string());
}

namespace {

Scenario base(const std::string& name, const std::string& model, std::uint64_t B, std::uint64_t s) {
  Scenario sc;
  sc.name = name;
  sc.model = model_preset(model);
  sc.train = {B, s, 1};
  return sc;
}

void homogeneous_fleet(Scenario& sc, std::size_t D) {
  sc.fleet.profile = "homogeneous";
  sc.fleet.params = HeterogeneityProfile::homogeneous(5e12, 50e6, 8e6, 4e9);
  sc.fleet.devices = D;
}

}  // namespace

Scenario preset_scenario(const std::string& name) {
  Scenario sc;
  if (name == "tiny") {
    sc = base(name, "tiny", 2, 4);
    sc.fleet.devices = 3;
    sc.scheduler.block = 1;
    sc.sim.verify_outputs = true;
  } else if (name == "volumes") {
    sc = base(name, "llama-13b", 128, 1024);
    sc.parallelism.tp_degree = 8;
    sc.analyses = {"volumes", "crossovers"};
    for (double d = 8; d <= 8192; d *= 2) sc.volume_devices.push_back(d);
  } else if (name == "tail") {
    sc = base(name, "tiny", 1, 1);
    sc.analyses = {"tail_table", "tail_formulas"};
    sc.mc_samples = 100000;
  } else if (name == "strong_scaling") {
    sc = base(name, "llama-7b", 16, 1024);
    sc.model.num_layers = 8;
    homogeneous_fleet(sc, 16);
    sc.sweep.axis = SweepAxis::devices;
    sc.sweep.values = {16, 32, 64, 128};
    sc.sweep.baselines = {BaselineMode::alpa_like};
  } else if (name == "weak_model") {
    sc = base(name, "llama-13b", 16, 1024);
    sc.model.num_layers = 10;
    homogeneous_fleet(sc, 32);
    sc.sweep.axis = SweepAxis::model_size;
    sc.sweep.values = {1, 2, 4};
    sc.sweep.proportional_devices = true;
  } else if (name == "weak_batch") {
    sc = base(name, "llama-13b", 8, 1024);
    sc.model.num_layers = 10;
    homogeneous_fleet(sc, 32);
    sc.sweep.axis = SweepAxis::batch_size;
    sc.sweep.values = {1, 2, 4};
    sc.sweep.proportional_devices = true;
  } else if (name == "stragglers") {
    sc = base(name, "opt-13b", 32, 1024);
    homogeneous_fleet(sc, 32);
    sc.fleet.straggler_slowdown = 10;
    sc.parallelism.pp_stages = 4;
    sc.sweep.axis = SweepAxis::straggler_fraction;
    sc.sweep.values = {0, 0.2};
    sc.sweep.baselines = {BaselineMode::alpa_like, BaselineMode::dtfm_like};
  } else if (name == "churn") {
    sc = base(name, "opt-13b", 128, 1024);
    sc.fleet.devices = 256;
    ChurnEvent fail;
    fail.time = 1.0;
    fail.device_id = 17;
    fail.kind = ChurnEvent::Kind::fail;
    sc.churn.events.push_back(fail);
    sc.analyses = {"recovery"};
  } else if (name == "memory") {
    sc = base(name, "llama-7b", 128, 1024);
    sc.fleet.profile = "phones";
    sc.fleet.params.phone_fraction = 1;
    sc.fleet.devices = 8192;
    sc.sweep.axis = SweepAxis::model;
    sc.sweep.models = {"llama-7b", "llama-13b", "llama-70b"};
  } else if (name == "ablation") {
    sc = base(name, "llama-7b", 16, 512);
    sc.model.num_layers = 2;
    sc.fleet.devices = 16;
    sc.fleet.straggler_fraction = 0.25;
    sc.fleet.straggler_slowdown = 10;
    sc.scheduler.block = 32;
    sc.ablations = {Ablation::no_tp, Ablation::no_ps, Ablation::no_heterogeneity};
  } else {
    throw ConfigError("--preset", fmt::format("unknown preset '{}'", name));
  }
  sc.validate();
  return sc;
}

std::vector<std::string> preset_names() {
  return {"tiny", "volumes", "tail", "strong_scaling", "weak_model", "weak_batch", "stragglers", "churn", "memory", "ablation"};
}

}  // namespace edgeshard
