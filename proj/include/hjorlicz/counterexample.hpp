#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "hj_condition.hpp"
#include "numeric.hpp"
#include "orlicz_function.hpp"

namespace hjorlicz {

struct KMargin {
  int k;
  double margin;
};

struct CounterexampleResult {
  CounterexampleResult(OrliczFunction psi_, OrliczFunction phi_) : psi(std::move(psi_)), phi(std::move(phi_)) {}

  OrliczFunction psi;
  OrliczFunction phi;
  // u_1 = 0, u_2, ..., u_depth
  std::vector<double> breakpoints;
  // ln Psi(u_k), ln Psi'(u_k+)
  std::vector<double> log_values;
  std::vector<double> log_slopes;
  std::vector<KMargin> margin_ii;   // ln u_{k+1} - ln(k u_k)
  std::vector<KMargin> margin_iii;  // ln Psi(k u_k) - ln k - k^2 ln k - k^2 ln Psi(u_k)
  std::vector<KMargin> margin_iv;   // ln Phi'(u_k+) - ln Psi'(u_k-)
  std::vector<KMargin> margin_v;    // same target through the linear extension with slope Phi'(u_k+)
  double audit_margin = 0.0;        // min over audit points of ln Phi - ln Psi
  bool dominated = true;
  int requested_depth = 0;
  int depth = 0;
  bool complete = true;
  std::string notice;

  double u(int k) const { return breakpoints.at(static_cast<std::size_t>(k - 1)); }

  // Points (n, u_n) for n = 2..depth
  std::vector<std::pair<double, double>> schedule() const {
    std::vector<std::pair<double, double>> s;
    for (int k = 2; k <= depth; ++k) s.emplace_back(static_cast<double>(k), u(k));
    return s;
  }

  bool all_margins_positive() const {
    auto pos = [](const std::vector<KMargin>& v) {
      return std::all_of(v.begin(), v.end(), [](const KMargin& m) { return m.margin > 0; });
    };
    return pos(margin_ii) && pos(margin_iii) && pos(margin_iv) && pos(margin_v) && dominated;
  }
};

// Local growth exponent x Phi'(x) / Phi(x) at x = 10^3, 10^6, ..., 10^15. It must
// increase strictly and end above twice its first value.
inline bool is_superpolynomial(const OrliczFunction& phi) {
  double first = 0.0, prev = kNegInf;
  for (int e = 3; e <= 15; e += 3) {
    const double x = std::pow(10.0, e);
    const double g = std::log(x) + phi.log_derivative(x) - phi.log_value(x);
    if (!(g > prev)) return false;
    if (e == 3) first = g;
    prev = g;
  }
  return prev > first + std::log(2.0);
}

// ln of k * k^{k^2} * Psi(u)^{k^2}
inline double counterexample_target(int k, double log_psi_u) {
  const double kk = static_cast<double>(k) * k;
  const double lk = std::log(static_cast<double>(k));
  return lk + kk * lk + kk * log_psi_u;
}

inline std::vector<KMargin> verify_counterexample(const OrliczFunction& psi, const std::vector<double>& breakpoints) {
  std::vector<KMargin> out;
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    const double uk = breakpoints[i];
    const double m = psi.log_value(k * uk) - counterexample_target(k, psi.log_value(uk));
    out.push_back({k, m});
  }
  return out;
}

inline std::vector<KMargin> verify_counterexample(const CounterexampleResult& r) {
  return verify_counterexample(r.psi, r.breakpoints);
}

inline CounterexampleResult build_counterexample(const OrliczFunction& phi, int n_max) {
  if (n_max < 2) throw InvalidParameter("build_counterexample: n_max must be >= 2");
  if (!is_superpolynomial(phi)) {
    throw InvalidParameter("build_counterexample: " + phi.describe() + " is not superpolynomial");
  }

  std::vector<double> u{0.0};
  std::vector<double> lv{kNegInf};
  std::vector<double> ls;  // ls[i]: slope on [u_{i+1}, u_{i+2})
  std::string notice;

  // u_2: Phi(u) > 1, Phi'(u+) > 1/u, Phi'(u+) u + 1 > 32, u > 1.
  auto first_ok = [&](double x) {
    const double ld = phi.log_derivative(x);
    return x > 1.0 && phi.log_value(x) > 0.0 && ld + std::log(x) > 0.0 &&
           log_add_exp(ld + std::log(x), 0.0) > std::log(32.0);
  };
  // A small relative step past the threshold keeps the k = 2 margin clear of rounding.
  const double u2 = threshold_search_tight(first_ok, 1.0).hi * (1.0 + 1e-6);
  u.push_back(u2);
  lv.push_back(0.0);
  ls.push_back(-std::log(u2));

  for (int n = 2; n < n_max; ++n) {
    const double un = u.back();
    const double lpsi = lv.back();
    const double lslope = phi.log_derivative(un);
    const int m = n + 1;
    const double mm = static_cast<double>(m) * m;
    const double lm = std::log(static_cast<double>(m));
    const double floor_u = n * un;
    auto ok = [&](double x) {
      if (!(x > floor_u)) return false;
      const double lin = log_add_exp(lslope + std::log(x - un), lpsi);
      const double rhs = log_add_exp((1.0 + mm) * lm + mm * lin, lslope);
      return phi.log_derivative(x) > rhs;
    };
    // Double from n u_n, then bisect the last doubling interval.
    double lo = floor_u;
    double hi = floor_u * 2.0;
    bool found = false;
    while (std::isfinite(hi)) {
      if (ok(hi)) {
        found = true;
        break;
      }
      lo = hi;
      hi *= 2.0;
    }
    if (!found) {
      notice = "breakpoint search exhausted the representable range at depth " + std::to_string(n);
      break;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = lo + 0.5 * (hi - lo);
      if (mid <= lo || mid >= hi) break;
      if (ok(mid)) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    const double next_lv = log_add_exp(lslope + std::log(hi - un), lpsi);
    ls.push_back(lslope);
    u.push_back(hi);
    lv.push_back(next_lv);
  }
  // Final ray continues with slope Phi'(u_depth+).
  ls.push_back(phi.log_derivative(u.back()));

  const int depth = static_cast<int>(u.size());
  PiecewiseData data;
  data.breakpoints = u;
  data.log_values = lv;
  data.log_slopes = ls;

  CounterexampleResult r(OrliczFunction::piecewise_affine_log(data), phi);
  r.breakpoints = u;
  r.log_values = lv;
  r.log_slopes = data.log_slopes;
  r.requested_depth = n_max;
  r.depth = depth;
  r.complete = depth == n_max;
  r.notice = notice;

  for (int k = 2; k <= depth; ++k) {
    const double uk = r.u(k);
    const double lpsi = lv[static_cast<std::size_t>(k - 1)];
    if (k < depth) r.margin_ii.push_back({k, std::log(r.u(k + 1)) - std::log(k * uk)});
    r.margin_iv.push_back({k, phi.log_derivative(uk) - data.log_slopes[static_cast<std::size_t>(k - 2)]});
    const double ext = log_add_exp(phi.log_derivative(uk) + std::log((k - 1) * uk), lpsi);
    r.margin_v.push_back({k, ext - counterexample_target(k, lpsi)});
  }
  r.margin_iii = verify_counterexample(r.psi, r.breakpoints);

  // Psi <= Phi on breakpoints, segment midpoints, k u_k and a few points on the ray.
  std::vector<double> audit;
  for (std::size_t i = 1; i < u.size(); ++i) {
    audit.push_back(u[i]);
    if (i + 1 < u.size()) audit.push_back(0.5 * (u[i] + u[i + 1]));
    audit.push_back(static_cast<double>(i + 1) * u[i]);
  }
  for (double f : {2.0, 10.0, 100.0}) audit.push_back(f * u.back());
  r.audit_margin = kInf;
  for (double x : audit) {
    const double lp = phi.log_value(x);
    const double lq = r.psi.log_value(x);
    r.audit_margin = std::min(r.audit_margin, lp - lq);
    if (lq > lp + 1e-12 * std::max(1.0, std::abs(lp))) r.dominated = false;
  }
  return r;
}

}  // namespace hjorlicz
