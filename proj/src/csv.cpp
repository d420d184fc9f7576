// Copyright 2026 The edgeshard Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgeshard/csv.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "edgeshard/errors.hpp"

namespace edgeshard {

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace

std::string format_cell(const CsvCell& cell) {
  struct Visitor {
    std::string operator()(const std::string& s) const { return quote(s); }
    std::string operator()(double v) const {
      if (std::isnan(v)) return "nan";
      if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
      if (v == 0) return "0";  // folds -0
      return fmt::format("{:.10g}", v);
    }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(std::uint64_t v) const { return std::to_string(v); }
  };
  return std::visit(Visitor{}, cell);
}

CsvTable::CsvTable(std::string kind, std::vector<std::string> columns)
    : kind_(std::move(kind)), columns_(std::move(columns)) {
  if (kind_.empty() || kind_.find_first_of(" \n,") != std::string::npos)
    throw ConfigError("csv.kind", fmt::format("invalid table kind '{}'", kind_));
}

void CsvTable::add_row(std::vector<CsvCell> row) {
  if (row.size() != columns_.size()) {
    throw ConfigError("csv." + kind_, fmt::format("row has {} cells, expected {}", row.size(), columns_.size()));
  }
  rows_.push_back(std::move(row));
}

std::size_t CsvTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == name) return i;
  throw ConfigError("csv." + kind_, fmt::format("no column '{}'", name));
}

double CsvTable::number(std::size_t r, std::string_view column) const {
  const auto& cell = row(r).at(column_index(column));
  if (const auto* d = std::get_if<double>(&cell)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return static_cast<double>(*i);
  if (const auto* u = std::get_if<std::uint64_t>(&cell)) return static_cast<double>(*u);
  try {
    return std::stod(std::get<std::string>(cell));
  } catch (const std::exception&) {
    throw ConfigError("csv." + kind_, fmt::format("column '{}' row {} is not numeric", column, r));
  }
}

std::string CsvTable::text(std::size_t r, std::string_view column) const {
  const auto& cell = row(r).at(column_index(column));
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  return format_cell(cell);
}

std::string CsvTable::to_string() const {
  std::string out = fmt::format("# edgeshard-csv {} {}\n", kCsvVersion, kind_);
  auto emit = [&out](const auto& cells, auto&& fmt_one) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += fmt_one(cells[i]);
    }
    out += '\n';
  };
  emit(columns_, [](const std::string& c) { return quote(c); });
  for (const auto& r : rows_) emit(r, [](const CsvCell& c) { return format_cell(c); });
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv", "empty input");
  const std::string prefix = fmt::format("# edgeshard-csv {} ", kCsvVersion);
  if (line.rfind(prefix, 0) != 0) throw ConfigError("csv", "missing '" + prefix + "<kind>' header");
  const std::string kind = line.substr(prefix.size());
  if (!std::getline(in, line)) throw ConfigError("csv", "missing column header");
  CsvTable t(kind, split_line(line));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<CsvCell> cells;
    for (auto& s : split_line(line)) cells.emplace_back(std::move(s));
    t.add_row(std::move(cells));
  }
  return t;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("out", "cannot open " + path + " for writing");
  out << contents;
  if (!out) throw ConfigError("out", "write failed for " + path);
}

}  // namespace edgeshard
