// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the CLI. Each returns the CSV tables it
// would write, so callers and tests can inspect results in memory.

#pragma once

#include <string>
#include <vector>

#include "edgeshard/config.hpp"
#include "edgeshard/csv.hpp"

namespace edgeshard {

inline constexpr const char* kSystemName = "hybrid_tp";

struct CommandResult {
  std::vector<CsvTable> tables;

  const CsvTable* find(const std::string& kind) const;
};

CommandResult cmd_dag(const Scenario& s);
CommandResult cmd_schedule(const Scenario& s);
CommandResult cmd_simulate(const Scenario& s);
CommandResult cmd_analyze(const Scenario& s, unsigned jobs = 1);
/// Points run on up to `jobs` threads; rows come back in axis order.
CommandResult cmd_sweep(const Scenario& s, unsigned jobs = 1);

/// Dispatches on "dag", "schedule", "simulate", "analyze" or "sweep".
CommandResult run_command(const std::string& command, const Scenario& s, unsigned jobs = 1);

/// Writes <out_dir>/<scenario>_<kind>.csv for every table; returns the paths.
std::vector<std::string> write_outputs(const CommandResult& r, const std::string& scenario_name,
                                       const std::string& out_dir);

}  // namespace edgeshard
