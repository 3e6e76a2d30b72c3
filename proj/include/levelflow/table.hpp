#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "levelflow/error.hpp"

namespace levelflow {

using Cell = std::variant<double, std::int64_t, std::string>;

/// Shortest text for a double that keeps 17 significant digits.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

inline std::string cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? format_number(*d) : "null";
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  return nlohmann::json(std::get<std::string>(c)).dump();
}

/// Resolved run parameters written at the top of every artifact.
using Metadata = std::vector<std::pair<std::string, Cell>>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns.size())
      throw Error(Errc::invalid_argument, "row has " + std::to_string(row.size()) + " cells, table has " +
                                              std::to_string(columns.size()) + " columns");
    rows.push_back(std::move(row));
  }
};

/// CSV: "# key=value" metadata lines, a header row, then data rows.
inline void write_csv(std::ostream& os, const Metadata& meta, const Table& table) {
  for (const auto& [key, value] : meta) os << "# " << key << '=' << cell_text(value) << '\n';
  for (std::size_t c = 0; c < table.columns.size(); ++c) os << (c ? "," : "") << table.columns[c];
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << cell_text(row[c]);
    os << '\n';
  }
}

/// JSON: {"config": {...}, "columns": [...], "rows": [{column: value, ...}, ...]}.
inline void write_json(std::ostream& os, const Metadata& meta, const Table& table) {
  os << "{\n  \"config\": {";
  for (std::size_t i = 0; i < meta.size(); ++i)
    os << (i ? ", " : "") << nlohmann::json(meta[i].first).dump() << ": " << cell_json(meta[i].second);
  os << "},\n  \"columns\": [";
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    os << (c ? ", " : "") << nlohmann::json(table.columns[c]).dump();
  os << "],\n  \"rows\": [";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    os << (r ? ",\n    {" : "\n    {");
    for (std::size_t c = 0; c < table.columns.size(); ++c)
      os << (c ? ", " : "") << nlohmann::json(table.columns[c]).dump() << ": " << cell_json(table.rows[r][c]);
    os << '}';
  }
  os << (table.rows.empty() ? "]\n}\n" : "\n  ]\n}\n");
}

inline void write_table_file(const std::filesystem::path& path, bool json, const Metadata& meta,
                             const Table& table) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(Errc::io_error, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::io_error, "cannot open " + path.string() + " for writing");
  if (json)
    write_json(os, meta, table);
  else
    write_csv(os, meta, table);
  os.flush();
  if (!os) throw Error(Errc::io_error, "write to " + path.string() + " failed");
}

}  // namespace levelflow
