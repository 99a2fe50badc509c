#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "concentration.hpp"
#include "dist_ops.hpp"
#include "errors.hpp"
#include "finite_dist.hpp"
#include "numeric.hpp"
#include "orlicz_function.hpp"
#include "serialize.hpp"

namespace hjorlicz {

// Run configuration: one JSON object per run. Keys outside the command's
// schema are rejected; absent keys take the defaults below.
struct RunConfig {
  std::string command;
  json params;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string format = "csv";
  std::string out = ".";
  std::optional<OrliczFunction> psi;
  std::optional<OrliczFunction> phi;
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"norm",   "check-hj", "counterexample", "ratio-sweep",   "series",
                                              "tails",  "calibrate", "verify-lemmas", "crucial-check", "poisson-check"};
  return names;
}

namespace detail {

inline json psi1_json() { return {{"family", "exp_power"}, {"alpha", 1.0}}; }

inline json log_grid_json(double lo, double hi, int points) { return {{"lo", lo}, {"hi", hi}, {"points", points}}; }

// Defaults per command; a null default marks an optional key with no value.
inline const std::map<std::string, json>& command_defaults() {
  static const std::map<std::string, json> d = [] {
    std::map<std::string, json> m;
    json pow2 = json::array();
    for (int n = 2; n <= 1024; n *= 2) pow2.push_back(n);
    const json process = {{"kind", "rademacher_projection"}, {"d", 4}, {"n", 16}};
    m["norm"] = {{"psi", nullptr},         {"distribution", nullptr}, {"family", nullptr}, {"functional", "sum"},
                 {"method", "exact"},      {"samples", 100000},       {"tolerance", 1e-10}};
    m["check-hj"] = {{"psi", nullptr}, {"s_grid", log_grid_json(2, 1e6, 25)}, {"u_grid", log_grid_json(2, 1e6, 25)}};
    m["counterexample"] = {{"phi", psi1_json()}, {"n_max", 4}};
    m["ratio-sweep"] = {{"psi", nullptr},     {"u_grid", {2, 3, 4, 5, 6, 7, 8, 9, 10}},
                        {"n_grid", pow2},     {"mode", "exact"},
                        {"samples", 100000},  {"schedule", nullptr},
                        {"quantile", false}};
    m["series"] = {{"phi", psi1_json()}, {"n_max", 12}, {"k_max", 4}, {"compare_psi", psi1_json()}};
    m["tails"] = {{"psi", nullptr}, {"process", process}, {"samples", 100000},
                  {"exact", false}, {"t_grid", nullptr},  {"c", 1.0}};
    m["calibrate"] = {{"psi", nullptr},    {"process", process},    {"samples", 100000},
                      {"exact", false},    {"t_grid", nullptr},     {"c_grid", nullptr},
                      {"bounds", {"bennett", "bernstein", "convex"}}, {"ratio_limit", 10.0}};
    m["verify-lemmas"] = {{"cases", 1000}};
    m["crucial-check"] = {{"psi", nullptr},
                          {"family", {{"kind", "rademacher"}, {"n", 8}}},
                          {"q", {2, 3, 4}},
                          {"k", {1, 2, 4}},
                          {"u_factors", {0.25, 1.0, 4.0}},
                          {"mode", "auto"},
                          {"samples", 100000}};
    m["poisson-check"] = {{"psi", nullptr},          {"u_grid", nullptr},
                          {"s_grid", {4.0, 8.0, 16.0}}, {"n", 1000},
                          {"n_sweep", {100, 1000, 10000}}};
    return m;
  }();
  return d;
}

inline const std::vector<std::string>& common_keys() {
  static const std::vector<std::string> k{"command", "seed", "threads", "format", "out", "budget"};
  return k;
}

inline std::uint64_t to_u64(const json& j, const std::string& key) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw InvalidParameter("config: key '" + key + "' must be a non-negative integer");
}

inline void require_number_key(const json& p, const char* key, bool positive = false) {
  if (p.contains(key) && !p.at(key).is_null()) {
    if (!p.at(key).is_number()) throw InvalidParameter(std::string("config: key '") + key + "' must be a number");
    if (positive && !(p.at(key).get<double>() > 0)) throw InvalidParameter(std::string("config: key '") + key + "' must be positive");
  }
}

}  // namespace detail

// Array of numbers, or {"lo", "hi", "points"} for a log-spaced grid.
inline std::vector<double> parse_grid(const json& j, const std::string& key) {
  if (j.is_array()) {
    std::vector<double> g;
    for (const auto& x : j) {
      if (!x.is_number()) throw InvalidParameter("config: grid '" + key + "' must contain numbers");
      g.push_back(x.get<double>());
    }
    if (g.empty()) throw InvalidParameter("config: grid '" + key + "' is empty");
    return g;
  }
  if (j.is_object()) {
    detail::reject_unknown_keys(j, {"lo", "hi", "points"}, "config: grid '" + key + "'");
    const double lo = detail::require_number(j, "lo", key);
    const double hi = detail::require_number(j, "hi", key);
    const double pts = detail::require_number(j, "points", key);
    if (!(lo > 0) || !(hi > lo) || pts < 2 || pts != std::floor(pts)) {
      throw InvalidParameter("config: grid '" + key + "' needs 0 < lo < hi and integer points >= 2");
    }
    return log_grid(lo, hi, static_cast<std::size_t>(pts));
  }
  throw InvalidParameter("config: grid '" + key + "' must be an array or {lo, hi, points}");
}

inline std::vector<std::size_t> parse_size_list(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw InvalidParameter("config: '" + key + "' must be a nonempty array of integers");
  std::vector<std::size_t> v;
  for (const auto& x : j) v.push_back(static_cast<std::size_t>(detail::to_u64(x, key)));
  return v;
}

// {"values": [...], "probs": [...]} or {"points": [[...], ...], "probs": [...], "norm": "euclidean"}
inline FiniteDist parse_distribution(const json& j, const std::string& where = "distribution") {
  if (!j.is_object()) throw InvalidParameter("config: '" + where + "' must be an object");
  detail::reject_unknown_keys(j, {"values", "points", "probs", "norm"}, "config: " + where);
  if (!j.contains("probs") || !j.at("probs").is_array()) throw InvalidParameter("config: " + where + ": missing array 'probs'");
  const auto probs = parse_grid(j.at("probs"), where + ".probs");
  if (j.contains("values")) {
    return FiniteDist::scalar(parse_grid(j.at("values"), where + ".values"), probs, 1e-9);
  }
  if (!j.contains("points") || !j.at("points").is_array()) throw InvalidParameter("config: " + where + ": need 'values' or 'points'");
  std::vector<double> flat;
  std::size_t dim = 0;
  for (const auto& p : j.at("points")) {
    const auto v = parse_grid(p, where + ".points");
    if (dim == 0) dim = v.size();
    if (v.size() != dim) throw InvalidParameter("config: " + where + ": points differ in dimension");
    flat.insert(flat.end(), v.begin(), v.end());
  }
  NormTag tag = NormTag::euclidean;
  if (j.contains("norm")) {
    const std::string n = j.at("norm").get<std::string>();
    if (n == "sup") tag = NormTag::sup;
    else if (n == "euclidean") tag = NormTag::euclidean;
    else if (n == "l1") tag = NormTag::l1;
    else if (n == "abs") tag = NormTag::abs;
    else throw InvalidParameter("config: " + where + ": unknown norm '" + n + "'");
  }
  return FiniteDist::vector(dim, std::move(flat), probs, tag, 1e-9);
}

// Family kinds: three_point {u, n}, centered_bernoulli {u, n}, rademacher {n},
// iid {distribution, n}, independent {members}
inline Family parse_family(const json& j, const OrliczFunction* psi) {
  if (!j.is_object() || !j.contains("kind")) throw InvalidParameter("config: 'family' must be an object with 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  auto need_n = [&] {
    if (!j.contains("n")) throw InvalidParameter("config: family '" + kind + "' needs 'n'");
    const auto n = detail::to_u64(j.at("n"), "family.n");
    if (n == 0) throw InvalidParameter("config: family.n must be >= 1");
    return static_cast<std::size_t>(n);
  };
  if (kind == "three_point" || kind == "centered_bernoulli") {
    detail::reject_unknown_keys(j, {"kind", "u", "n"}, "config: family");
    if (!psi) throw InvalidParameter("config: family '" + kind + "' needs 'psi'");
    const double u = detail::require_number(j, "u", "family");
    const std::size_t n = need_n();
    return Family::iid(kind == "three_point" ? make_three_point(*psi, u, n) : make_centered_bernoulli(*psi, u, n), n);
  }
  if (kind == "rademacher") {
    detail::reject_unknown_keys(j, {"kind", "n"}, "config: family");
    return Family::iid(FiniteDist::scalar({-1.0, 1.0}, {0.5, 0.5}), need_n());
  }
  if (kind == "iid") {
    detail::reject_unknown_keys(j, {"kind", "distribution", "n"}, "config: family");
    if (!j.contains("distribution")) throw InvalidParameter("config: family 'iid' needs 'distribution'");
    return Family::iid(parse_distribution(j.at("distribution"), "family.distribution"), need_n());
  }
  if (kind == "independent") {
    detail::reject_unknown_keys(j, {"kind", "members"}, "config: family");
    if (!j.contains("members") || !j.at("members").is_array()) throw InvalidParameter("config: family 'independent' needs 'members'");
    std::vector<FiniteDist> ms;
    for (const auto& m : j.at("members")) ms.push_back(parse_distribution(m, "family.members"));
    return Family::independent(std::move(ms));
  }
  throw InvalidParameter("config: unknown family kind '" + kind + "'");
}

// rademacher_projection {d, n} or explicit {functions, laws, n, symmetric}
inline EmpiricalProcessSpec parse_process(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw InvalidParameter("config: 'process' must be an object with 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "rademacher_projection") {
    detail::reject_unknown_keys(j, {"kind", "d", "n"}, "config: process");
    return rademacher_projection_spec(static_cast<std::size_t>(detail::to_u64(j.value("d", json(4)), "process.d")),
                                      static_cast<std::size_t>(detail::to_u64(j.value("n", json(16)), "process.n")));
  }
  if (kind == "explicit") {
    detail::reject_unknown_keys(j, {"kind", "functions", "laws", "n", "symmetric"}, "config: process");
    EmpiricalProcessSpec s;
    for (const auto& f : j.at("functions")) s.functions.push_back(parse_grid(f, "process.functions"));
    for (const auto& p : j.at("laws")) s.laws.push_back(parse_grid(p, "process.laws"));
    s.n = static_cast<std::size_t>(detail::to_u64(j.at("n"), "process.n"));
    s.symmetric_class = j.value("symmetric", false);
    s.validate();
    return s;
  }
  throw InvalidParameter("config: unknown process kind '" + kind + "'");
}

inline OrliczFunction parse_validated_psi(const json& j, const std::string& key) {
  OrliczFunction f = orlicz_from_json(j, key);
  require_valid(f);
  return f;
}

// Parses config text for `command` (the text may name the command itself).
inline RunConfig parse_config(const std::string& text, const std::string& command = "") {
  const json j = text.empty() ? json::object() : parse_json_strict(text);
  if (!j.is_object()) throw InvalidParameter("config: top level must be an object");
  RunConfig rc;
  rc.command = command;
  if (j.contains("command")) {
    if (!j.at("command").is_string()) throw InvalidParameter("config: 'command' must be a string");
    const auto c = j.at("command").get<std::string>();
    if (!command.empty() && c != command) throw InvalidParameter("config: command '" + c + "' does not match '" + command + "'");
    rc.command = c;
  }
  const auto& defaults = detail::command_defaults();
  const auto it = defaults.find(rc.command);
  if (it == defaults.end()) throw InvalidParameter("config: unknown command '" + rc.command + "'");
  const json& def = it->second;
  for (auto kv = j.begin(); kv != j.end(); ++kv) {
    const auto& k = kv.key();
    const bool common = std::find(detail::common_keys().begin(), detail::common_keys().end(), k) != detail::common_keys().end();
    if (!common && !def.contains(k)) throw InvalidParameter("config: unknown key '" + k + "' for command '" + rc.command + "'");
  }
  rc.params = def;
  for (auto kv = j.begin(); kv != j.end(); ++kv) {
    if (def.contains(kv.key())) rc.params[kv.key()] = kv.value();
  }
  rc.params["budget"] = j.contains("budget") ? detail::to_u64(j.at("budget"), "budget") : kDefaultAtomBudget;
  if (j.contains("seed")) rc.seed = detail::to_u64(j.at("seed"), "seed");
  if (j.contains("threads")) {
    const auto t = detail::to_u64(j.at("threads"), "threads");
    if (t == 0 || t > 1024) throw InvalidParameter("config: 'threads' must be in [1, 1024]");
    rc.threads = static_cast<unsigned>(t);
  }
  if (j.contains("format")) rc.format = j.at("format").get<std::string>();
  if (rc.format != "csv" && rc.format != "json") throw InvalidParameter("config: 'format' must be csv or json");
  if (j.contains("out")) rc.out = j.at("out").get<std::string>();

  const json& p = rc.params;
  for (const char* k : {"tolerance", "c", "ratio_limit"}) detail::require_number_key(p, k, true);
  for (const char* k : {"samples", "cases", "n_max", "k_max", "n"}) {
    if (p.contains(k) && !p.at(k).is_null()) (void)detail::to_u64(p.at(k), k);
  }
  if (p.contains("psi") && !p.at("psi").is_null()) rc.psi = parse_validated_psi(p.at("psi"), "psi");
  if (p.contains("phi") && !p.at("phi").is_null()) rc.phi = parse_validated_psi(p.at("phi"), "phi");
  if (p.contains("compare_psi") && !p.at("compare_psi").is_null()) (void)parse_validated_psi(p.at("compare_psi"), "compare_psi");
  return rc;
}

}  // namespace hjorlicz
