#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace hjorlicz {

inline constexpr const char* kToolVersion = "0.1.0";

using Cell = std::variant<std::monostate, double, std::int64_t, std::string, bool>;

// A report table. Every row starts with tool_version, psi_hash, seed, method.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  Table(std::string n, std::vector<std::string> extra) : name(std::move(n)) {
    columns = {"tool_version", "psi_hash", "seed", "method"};
    columns.insert(columns.end(), extra.begin(), extra.end());
  }

  void add(const std::string& psi_hash, std::optional<std::uint64_t> seed, const std::string& method,
           std::vector<Cell> values) {
    if (values.size() + 4 != columns.size()) throw InvalidParameter("Table " + name + ": row width mismatch");
    std::vector<Cell> row{std::string(kToolVersion), psi_hash,
                          seed ? Cell(static_cast<std::int64_t>(*seed)) : Cell(std::monostate{}), method};
    row.insert(row.end(), values.begin(), values.end());
    rows.push_back(std::move(row));
  }
};

struct Report {
  std::string name;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<Table> tables;
};

inline Cell opt_cell(const std::optional<double>& v) { return v ? Cell(*v) : Cell(std::monostate{}); }

// Shortest round-trip text; non-finite values as inf, -inf, nan.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

namespace detail {

inline std::string csv_field(const Cell& c) {
  struct V {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(double x) const { return format_double(x); }
    std::string operator()(std::int64_t x) const { return std::to_string(x); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(const std::string& s) const {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
      }
      return q + '"';
    }
  };
  return std::visit(V{}, c);
}

inline nlohmann::json json_field(const Cell& c) {
  struct V {
    nlohmann::json operator()(std::monostate) const { return nullptr; }
    nlohmann::json operator()(double x) const { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(format_double(x)); }
    nlohmann::json operator()(std::int64_t x) const { return x; }
    nlohmann::json operator()(bool b) const { return b; }
    nlohmann::json operator()(const std::string& s) const { return s; }
  };
  return std::visit(V{}, c);
}

}  // namespace detail

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + detail::csv_field(row[i]);
    out += '\n';
  }
  return out;
}

inline nlohmann::json to_json(const Report& r) {
  nlohmann::json j;
  j["report"] = r.name;
  j["tool_version"] = kToolVersion;
  j["meta"] = r.meta;
  nlohmann::json tables = nlohmann::json::object();
  for (const auto& t : r.tables) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : t.rows) {
      nlohmann::json o = nlohmann::json::object();
      for (std::size_t i = 0; i < row.size(); ++i) o[t.columns[i]] = detail::json_field(row[i]);
      rows.push_back(std::move(o));
    }
    tables[t.name] = {{"columns", t.columns}, {"rows", rows}};
  }
  j["tables"] = tables;
  return j;
}

// Writes <dir>/<table>.csv per table (meta as <dir>/<report>_meta.json), or
// <dir>/<report>.json. Returns the written paths.
inline std::vector<std::string> write_report(const Report& r, const std::string& format, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create output directory '" + dir + "': " + ec.message());
  std::vector<std::string> paths;
  auto put = [&](const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ResourceError("cannot write '" + p.string() + "'");
    f << text;
    paths.push_back(p.string());
  };
  if (format == "json") {
    put(fs::path(dir) / (r.name + ".json"), to_json(r).dump(2) + "\n");
  } else if (format == "csv") {
    for (const auto& t : r.tables) put(fs::path(dir) / (t.name + ".csv"), to_csv(t));
    if (!r.meta.empty()) put(fs::path(dir) / (r.name + "_meta.json"), r.meta.dump(2) + "\n");
  } else {
    throw InvalidParameter("unknown format '" + format + "' (expected csv or json)");
  }
  return paths;
}

}  // namespace hjorlicz
