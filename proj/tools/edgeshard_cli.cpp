// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "edgeshard/config.hpp"
#include "edgeshard/errors.hpp"
#include "edgeshard/scenarios.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edgeshard: GEMM sharding scheduler and edge-fleet training simulator"};
  app.require_subcommand(1, 1);

  std::string config_path, preset, out_dir = ".";
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  bool list_presets = false;

  for (const char* name : {"dag", "schedule", "simulate", "analyze", "sweep"}) {
    auto* sub = app.add_subcommand(name);
    auto* cfg = sub->add_option("--config", config_path, "scenario JSON file");
    sub->add_option("--preset", preset, "built-in scenario")->excludes(cfg);
    sub->add_option("--seed", seed, "override the scenario seed");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1u, 1024u))->capture_default_str();
    sub->add_flag("--list-presets", list_presets, "print preset names and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  if (list_presets) {
    for (const auto& p : edgeshard::preset_names()) std::cout << p << '\n';
    return 0;
  }

  try {
    if (config_path.empty() && preset.empty()) throw edgeshard::ConfigError("--config", "give --config or --preset");
    auto scenario = preset.empty() ? edgeshard::load_scenario(config_path) : edgeshard::preset_scenario(preset);
    if (seed) scenario.seed = *seed;
    const auto result = edgeshard::run_command(command, scenario, jobs);
    for (const auto& path : edgeshard::write_outputs(result, scenario.name, out_dir)) std::cout << path << '\n';
  } catch (const edgeshard::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const edgeshard::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
