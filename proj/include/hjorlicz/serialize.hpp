#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "numeric.hpp"
#include "orlicz_function.hpp"

namespace hjorlicz {

using json = nlohmann::json;

// Orlicz function record:
//   {"family": "power_law", "p": 2}
//   {"family": "exp_power", "alpha": 0.5}
//   {"family": "heavy_tail_log", "beta": 2}
//   {"family": "exp_square"}
//   {"family": "piecewise_affine_log", "segments": [[x, ln_value, ln_slope], ...]}   ln_value null for -inf
//   {"family": "square_of", "inner": {...}}
inline json to_json(const OrliczFunction& f) {
  json j;
  j["family"] = family_name(f.family());
  switch (f.family()) {
    case PsiFamily::power_law: j["p"] = f.parameter(); break;
    case PsiFamily::exp_power: j["alpha"] = f.parameter(); break;
    case PsiFamily::heavy_tail_log: j["beta"] = f.parameter(); break;
    case PsiFamily::exp_square: break;
    case PsiFamily::piecewise_affine_log: {
      json segs = json::array();
      const auto* pw = f.piecewise();
      for (std::size_t i = 0; i < pw->breakpoints.size(); ++i) {
        json lv = pw->log_values[i] == kNegInf ? json(nullptr) : json(pw->log_values[i]);
        json ls = pw->log_slopes[i] == kNegInf ? json(nullptr) : json(pw->log_slopes[i]);
        segs.push_back(json::array({pw->breakpoints[i], lv, ls}));
      }
      j["segments"] = segs;
      break;
    }
    case PsiFamily::square_of: j["inner"] = to_json(*f.inner()); break;
  }
  return j;
}

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw InvalidParameter(where + ": unknown key '" + it.key() + "'");
  }
}

inline double require_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InvalidParameter(where + ": missing key '" + key + "'");
  if (!j.at(key).is_number()) throw InvalidParameter(where + ": key '" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline double number_or_neginf(const json& j, const std::string& where) {
  if (j.is_null()) return kNegInf;
  if (!j.is_number()) throw InvalidParameter(where + ": expected a number or null");
  return j.get<double>();
}

}  // namespace detail

inline OrliczFunction orlicz_from_json(const json& j, const std::string& where = "psi") {
  if (!j.is_object()) throw InvalidParameter(where + ": expected an object");
  if (!j.contains("family") || !j.at("family").is_string()) throw InvalidParameter(where + ": missing string key 'family'");
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "power_law") {
    detail::reject_unknown_keys(j, {"family", "p"}, where);
    return OrliczFunction::power_law(detail::require_number(j, "p", where));
  }
  if (fam == "exp_power") {
    detail::reject_unknown_keys(j, {"family", "alpha"}, where);
    return OrliczFunction::exp_power(detail::require_number(j, "alpha", where));
  }
  if (fam == "heavy_tail_log") {
    detail::reject_unknown_keys(j, {"family", "beta"}, where);
    return OrliczFunction::heavy_tail_log(detail::require_number(j, "beta", where));
  }
  if (fam == "exp_square") {
    detail::reject_unknown_keys(j, {"family"}, where);
    return OrliczFunction::exp_square();
  }
  if (fam == "piecewise_affine_log") {
    detail::reject_unknown_keys(j, {"family", "segments"}, where);
    if (!j.contains("segments") || !j.at("segments").is_array()) throw InvalidParameter(where + ": 'segments' must be an array");
    PiecewiseData d;
    for (const auto& seg : j.at("segments")) {
      if (!seg.is_array() || seg.size() != 3 || !seg[0].is_number()) {
        throw InvalidParameter(where + ": each segment is [breakpoint, ln_value, ln_slope]");
      }
      d.breakpoints.push_back(seg[0].get<double>());
      d.log_values.push_back(detail::number_or_neginf(seg[1], where));
      d.log_slopes.push_back(detail::number_or_neginf(seg[2], where));
    }
    return OrliczFunction::piecewise_affine_log(std::move(d));
  }
  if (fam == "square_of") {
    detail::reject_unknown_keys(j, {"family", "inner"}, where);
    if (!j.contains("inner")) throw InvalidParameter(where + ": missing key 'inner'");
    return orlicz_from_json(j.at("inner"), where + ".inner").square_composed();
  }
  throw InvalidParameter(where + ": unknown family '" + fam + "'");
}

// FNV-1a 64 over bytes
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// 16 hex digits of FNV-1a 64 over the canonical record (sorted keys, compact).
inline std::string spec_hash(const OrliczFunction& f) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(f).dump())));
  return buf;
}

// Parses JSON text and rejects duplicate object keys. Errors carry line and column.
inline json parse_json_strict(const std::string& text) {
  std::vector<std::set<std::string>> seen;
  std::string duplicate;
  json::parser_callback_t cb = [&](int, json::parse_event_t ev, json& parsed) {
    switch (ev) {
      case json::parse_event_t::object_start: seen.emplace_back(); break;
      case json::parse_event_t::object_end: seen.pop_back(); break;
      case json::parse_event_t::key: {
        const auto k = parsed.get<std::string>();
        if (!seen.back().insert(k).second && duplicate.empty()) duplicate = k;
        break;
      }
      default: break;
    }
    return true;
  };
  json j;
  try {
    j = json::parse(text, cb);
  } catch (const json::parse_error& e) {
    throw InvalidParameter(std::string("config parse error: ") + e.what());
  }
  if (!duplicate.empty()) throw InvalidParameter("config parse error: duplicate key '" + duplicate + "'");
  return j;
}

}  // namespace hjorlicz
