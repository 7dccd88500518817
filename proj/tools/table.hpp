#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace aoi::cli {

enum class Format { json, csv, human };

using Cell = std::variant<std::monostate, double, std::int64_t, std::string, bool>;

inline Cell opt_cell(const std::optional<double>& v) {
  if (v) return *v;
  return std::monostate{};
}

/// Rows of named columns, rendered as CSV, a JSON array of objects, or an
/// aligned text table.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

inline std::string format_double(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string cell_text(const Cell& c, int digits) {
  return std::visit(
      [&](const auto& v) -> std::string {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, std::monostate>) return "";
        else if constexpr (std::is_same_v<V, double>) return format_double(v, digits);
        else if constexpr (std::is_same_v<V, std::int64_t>) return std::to_string(v);
        else if constexpr (std::is_same_v<V, bool>) return v ? "true" : "false";
        else return v;
      },
      c);
}

inline nlohmann::ordered_json cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> nlohmann::ordered_json {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, std::monostate>) return nullptr;
        else if constexpr (std::is_same_v<V, double>) {
          if (!std::isfinite(v)) return nullptr;
          return v;
        } else return v;
      },
      c);
}

inline nlohmann::ordered_json table_json(const Table& t) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < t.columns.size(); ++i) obj[t.columns[i]] = cell_json(row[i]);
    arr.push_back(std::move(obj));
  }
  return arr;
}

inline void write_table(std::ostream& os, const Table& t, Format format) {
  switch (format) {
    case Format::csv: {
      for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
      os << '\n';
      for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell_text(row[i], 17);
        os << '\n';
      }
      break;
    }
    case Format::json:
      os << table_json(t).dump(2) << '\n';
      break;
    case Format::human: {
      std::vector<std::size_t> width(t.columns.size());
      std::vector<std::vector<std::string>> text;
      for (std::size_t i = 0; i < t.columns.size(); ++i) width[i] = t.columns[i].size();
      for (const auto& row : t.rows) {
        auto& line = text.emplace_back();
        for (std::size_t i = 0; i < row.size(); ++i) {
          line.push_back(cell_text(row[i], 10));
          width[i] = std::max(width[i], line.back().size());
        }
      }
      auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
          os << cells[i];
          if (i + 1 < cells.size()) os << std::string(width[i] - cells[i].size() + 2, ' ');
        }
        os << '\n';
      };
      emit(t.columns);
      for (const auto& line : text) emit(line);
      break;
    }
  }
}

}  // namespace aoi::cli
