// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace edgeshard {

/// Invalid configuration or input; `field` names what was wrong.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// The fleet cannot absorb a workload under its memory/overhead limits.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& message,
                           std::optional<std::size_t> level = std::nullopt)
      : std::runtime_error(level ? message + " (level " + std::to_string(*level) + ")" : message),
        level_(level) {}
  std::optional<std::size_t> level() const { return level_; }

 private:
  std::optional<std::size_t> level_;
};

}  // namespace edgeshard
