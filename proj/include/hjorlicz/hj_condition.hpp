#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"
#include "orlicz_function.hpp"

namespace hjorlicz {

struct HJGridPoint {
  double s;
  double u;
  double ratio;
};

enum class HJVerdict { bounded_on_grid, diverging };

inline const char* verdict_name(HJVerdict v) {
  return v == HJVerdict::diverging ? "diverging" : "bounded-on-grid";
}

struct HJConditionReport {
  std::vector<HJGridPoint> grid;
  double grid_k = 0.0;
  // Max ratio over the top s-decade divided by the max over the bottom one;
  // along a schedule, last ratio over first.
  double trend = 0.0;
  double bottom_max = 0.0;
  double top_max = 0.0;
  HJVerdict verdict = HJVerdict::bounded_on_grid;
  bool schedule = false;

  // Psi(su) <= (s Psi(u))^{K' s}: ratio ln Psi(su) / (s (ln s + ln Psi(u)))
  std::vector<HJGridPoint> hj_prime;
  double k_prime_needed = 0.0;
  bool hj_prime_consistent = true;  // k_prime_needed <= 4 grid_k + 4

  // x psi^{-1}(y) / (ln(1+x) psi^{-1}(xy)) at x = s, y = psi(u)
  std::vector<HJGridPoint> inverse_bound;
  double k_hat_needed = 0.0;
  std::size_t inverse_bound_skipped = 0;

  // Psi(2u)/Psi(u) per u
  std::vector<std::pair<double, double>> delta2;
  double delta2_max = 0.0;
  bool delta2_bounded = true;

  // Psi(x) <= K x^p for x >= K with K = e
  double poly_k = std::numbers::e;
  double poly_p = 0.0;
  bool polynomial = true;
};

// psi(su) / (s ln(1+s) + s psi(u))
inline double hj_ratio_at(const OrliczFunction& f, double s, double u) {
  if (!(s > 0) || !(u > 0)) throw DomainError("hj_ratio_at: s and u must be positive");
  const double num = f.psi(s * u);
  const double den = s * std::log1p(s) + s * f.psi(u);
  return num / den;
}

inline std::vector<double> default_hj_grid() { return log_grid(2.0, 1e6, 25); }

namespace detail {

inline void check_grid(std::span<const double> g, const char* name) {
  if (g.size() < 2) throw InvalidParameter(std::string(name) + " needs at least two points");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] >= 2.0) || !std::isfinite(g[i])) throw InvalidParameter(std::string(name) + " values must be finite and >= 2");
    if (i > 0 && !(g[i] > g[i - 1])) throw InvalidParameter(std::string(name) + " must be strictly ascending");
  }
}

inline void fill_subchecks(const OrliczFunction& f, std::span<const std::pair<double, double>> pts,
                           std::span<const double> u_values, HJConditionReport& r) {
  for (const auto& [s, u] : pts) {
    const double lu = f.log_value(u);
    if (lu >= 0.0) {
      const double q = f.log_value(s * u) / (s * (std::log(s) + lu));
      r.hj_prime.push_back({s, u, q});
      r.k_prime_needed = std::max(r.k_prime_needed, q);
    }
    try {
      const double y = f.psi(u);
      const double inv = f.invert(s * y, InverseScale::psi);
      const double q = s * u / (std::log1p(s) * inv);
      r.inverse_bound.push_back({s, u, q});
      r.k_hat_needed = std::max(r.k_hat_needed, q);
    } catch (const RangeError&) {
      ++r.inverse_bound_skipped;
    }
  }
  r.hj_prime_consistent = r.k_prime_needed <= 4.0 * r.grid_k + 4.0;

  if (u_values.empty()) return;
  const double umax = u_values.back();
  double d2_top = 0.0, d2_bottom = 0.0;
  double p_top = 0.0, p_prev = 0.0;
  for (double u : u_values) {
    const double q = std::exp(f.log_value(2.0 * u) - f.log_value(u));
    r.delta2.emplace_back(u, q);
    r.delta2_max = std::max(r.delta2_max, q);
    if (u <= 10.0 * u_values.front()) d2_bottom = std::max(d2_bottom, q);
    if (u >= umax / 10.0) d2_top = std::max(d2_top, q);
    if (u >= std::numbers::e) {
      const double p = (f.log_value(u) - 1.0) / std::log(u);
      r.poly_p = std::max(r.poly_p, p);
      if (u >= umax / 10.0) {
        p_top = std::max(p_top, p);
      } else if (u >= umax / 100.0) {
        p_prev = std::max(p_prev, p);
      }
    }
  }
  r.delta2_bounded = std::isfinite(d2_top) && d2_top <= 2.0 * d2_bottom;
  r.polynomial = p_prev <= 0.0 ? true : p_top <= 1.1 * p_prev;
}

}  // namespace detail

// Evaluates the (HJ) ratio on the product grid s x u. The verdict compares the
// largest ratio over the top s-decade [s_max/10, s_max] with the largest over
// the bottom one [s_min, 10 s_min]: diverging iff top > 2 bottom and top > 10 bottom.
inline HJConditionReport check_hj(const OrliczFunction& f, std::span<const double> s_grid,
                                  std::span<const double> u_grid) {
  detail::check_grid(s_grid, "s-grid");
  detail::check_grid(u_grid, "u-grid");
  HJConditionReport r;
  const double smin = s_grid.front();
  const double smax = s_grid.back();
  std::vector<std::pair<double, double>> pts;
  pts.reserve(s_grid.size() * u_grid.size());
  for (double s : s_grid) {
    for (double u : u_grid) {
      const double q = hj_ratio_at(f, s, u);
      r.grid.push_back({s, u, q});
      r.grid_k = std::max(r.grid_k, q);
      if (s <= 10.0 * smin) r.bottom_max = std::max(r.bottom_max, q);
      if (s >= smax / 10.0) r.top_max = std::max(r.top_max, q);
      pts.emplace_back(s, u);
    }
  }
  r.trend = r.top_max / r.bottom_max;
  const bool diverging = r.top_max > 2.0 * r.bottom_max && r.top_max > 10.0 * r.bottom_max;
  r.verdict = diverging ? HJVerdict::diverging : HJVerdict::bounded_on_grid;
  detail::fill_subchecks(f, pts, u_grid, r);
  return r;
}

inline HJConditionReport check_hj(const OrliczFunction& f) {
  const auto g = default_hj_grid();
  return check_hj(f, g, g);
}

// Ratios along a schedule of points (s_k, u_k), e.g. (n, u_n) of a constructed
// counterexample. Diverging iff the ratios increase strictly and the last is at
// least twice the first.
inline HJConditionReport check_hj_schedule(const OrliczFunction& f,
                                           std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw InvalidParameter("check_hj_schedule: need at least two points");
  HJConditionReport r;
  r.schedule = true;
  bool increasing = true;
  std::vector<double> us;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [s, u] = points[i];
    if (!(s >= 2.0) || !(u > 0.0)) throw InvalidParameter("check_hj_schedule: need s >= 2 and u > 0");
    const double q = hj_ratio_at(f, s, u);
    if (i > 0 && !(q > r.grid.back().ratio)) increasing = false;
    r.grid.push_back({s, u, q});
    r.grid_k = std::max(r.grid_k, q);
    us.push_back(u);
  }
  r.bottom_max = r.grid.front().ratio;
  r.top_max = r.grid.back().ratio;
  r.trend = r.top_max / r.bottom_max;
  r.verdict = increasing && r.top_max >= 2.0 * r.bottom_max ? HJVerdict::diverging : HJVerdict::bounded_on_grid;
  std::sort(us.begin(), us.end());
  us.erase(std::unique(us.begin(), us.end()), us.end());
  detail::fill_subchecks(f, points, us, r);
  return r;
}

}  // namespace hjorlicz
