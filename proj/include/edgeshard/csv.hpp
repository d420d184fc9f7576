// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Versioned CSV tables with deterministic number formatting.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace edgeshard {

inline constexpr std::string_view kCsvVersion = "v1";

using CsvCell = std::variant<std::string, double, std::int64_t, std::uint64_t>;

/// %.10g for floats; integers printed exactly.
std::string format_cell(const CsvCell& cell);

class CsvTable {
 public:
  CsvTable(std::string kind, std::vector<std::string> columns);

  const std::string& kind() const { return kind_; }
  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t rows() const { return rows_.size(); }

  void add_row(std::vector<CsvCell> row);
  const std::vector<CsvCell>& row(std::size_t i) const { return rows_.at(i); }
  std::size_t column_index(std::string_view name) const;
  double number(std::size_t row, std::string_view column) const;
  std::string text(std::size_t row, std::string_view column) const;

  /// "# edgeshard-csv v1 <kind>", the column header, then rows.
  std::string to_string() const;

 private:
  std::string kind_;
  std::vector<std::string> columns_;
  std::vector<std::vector<CsvCell>> rows_;
};

/// Parses the output of to_string back; cells come back as strings.
CsvTable parse_csv(const std::string& text);

void write_file(const std::string& path, const std::string& contents);

}  // namespace edgeshard
