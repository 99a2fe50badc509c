#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dist_ops.hpp"
#include "errors.hpp"
#include "finite_dist.hpp"
#include "numeric.hpp"
#include "orlicz_function.hpp"
#include "orlicz_norm.hpp"
#include "rng.hpp"

namespace hjorlicz {

// ---------------------------------------------------------------------------
// Tail bounds. Every bound returns the raw formula value and the value capped at 1.

struct BoundValue {
  double raw = 0.0;
  double capped = 0.0;
};

enum class BoundId { bennett, bernstein, convex };

inline const char* bound_name(BoundId b) {
  switch (b) {
    case BoundId::bennett: return "bennett";
    case BoundId::bernstein: return "bernstein";
    case BoundId::convex: return "convex";
  }
  return "bennett";
}

namespace detail {

inline void check_bound_args(const char* who, double t, double a, double b) {
  if (!(a > 0) || !(b > 0)) throw DomainError(std::string(who) + ": scale parameters must be positive");
  if (!(t >= 0) || !(t < kInf)) throw DomainError(std::string(who) + ": t must be finite and >= 0");
}

inline void check_c(const char* who, double c) {
  if (!(c > 0) || !std::isfinite(c)) throw DomainError(std::string(who) + ": c must be positive");
}

inline BoundValue make_bound(double raw) { return {raw, std::min(raw, 1.0)}; }

// 2 / (Psi(x) + 1) = 2 exp(-psi(x))
inline double orlicz_term(const OrliczFunction& f, double x) { return 2.0 * std::exp(-f.psi(x)); }

}  // namespace detail

// include_orlicz_term = true:
//   2 exp(-(c t/U) ln(1 + t U/S2)) + 2/(Psi(c t/U) + 1)
// include_orlicz_term = false (bounded-class form, C = 1/c):
//   C exp(-(t/(C U)) ln(1 + t U/S2))
inline BoundValue bennett_rhs(double t, double U, double sigma2, double c, const OrliczFunction& psi,
                              bool include_orlicz_term = true) {
  detail::check_bound_args("bennett_rhs", t, U, sigma2);
  detail::check_c("bennett_rhs", c);
  const double e = (c * t / U) * std::log1p(t * U / sigma2);
  if (!include_orlicz_term) return detail::make_bound(std::exp(-e) / c);
  return detail::make_bound(2.0 * std::exp(-e) + detail::orlicz_term(psi, c * t / U));
}

// equivalent = false: 2 exp(-c t^2/(S2 + t U)) + 2/(Psi(c t/U) + 1)
// equivalent = true:  2 exp(-c t^2/S2) + 2/(Psi(c t/U) + 1)
inline BoundValue bernstein_rhs(double t, double U, double sigma2, double c, const OrliczFunction& psi,
                                bool equivalent = false) {
  detail::check_bound_args("bernstein_rhs", t, U, sigma2);
  detail::check_c("bernstein_rhs", c);
  const double den = equivalent ? sigma2 : sigma2 + t * U;
  return detail::make_bound(2.0 * std::exp(-c * t * t / den) + detail::orlicz_term(psi, c * t / U));
}

// 2 exp(-c t^2/(E max)^2) + 2/(Phi(c t/U_Phi) + 1), Phi validated first.
inline BoundValue convex_rhs(double t, double mean_max, double u_phi, double c, const OrliczFunction& phi) {
  detail::check_bound_args("convex_rhs", t, mean_max, u_phi);
  detail::check_c("convex_rhs", c);
  const ValidationReport v = validate(phi);
  if (!v.ok()) throw DomainError("convex_rhs: Phi fails validation: " + v.message);
  return detail::make_bound(2.0 * std::exp(-c * t * t / (mean_max * mean_max)) +
                            detail::orlicz_term(phi, c * t / u_phi));
}

// ---------------------------------------------------------------------------
// Suprema of empirical processes over finite classes

// Base space S = {0, ..., m-1}. Each function of the class is a value table on S.
// `laws` holds one probability vector per member, or a single vector for an iid family.
struct EmpiricalProcessSpec {
  std::vector<std::vector<double>> functions;
  std::vector<std::vector<double>> laws;
  std::size_t n = 0;
  bool symmetric_class = false;  // supremum over A and -A

  std::size_t base_size() const { return functions.empty() ? 0 : functions.front().size(); }
  const std::vector<double>& law(std::size_t i) const { return laws.size() == 1 ? laws.front() : laws.at(i); }

  // F(x) = sup_f |f(x)|
  std::vector<double> envelope() const {
    std::vector<double> e(base_size(), 0.0);
    for (const auto& f : functions) {
      for (std::size_t x = 0; x < e.size(); ++x) e[x] = std::max(e[x], std::abs(f[x]));
    }
    return e;
  }

  void validate() const {
    if (functions.empty()) throw InvalidParameter("EmpiricalProcessSpec: empty class");
    if (n == 0) throw InvalidParameter("EmpiricalProcessSpec: N must be >= 1");
    const std::size_t m = base_size();
    if (m == 0) throw InvalidParameter("EmpiricalProcessSpec: empty base space");
    for (const auto& f : functions) {
      if (f.size() != m) throw InvalidParameter("EmpiricalProcessSpec: function tables differ in length");
      for (double v : f) {
        if (!std::isfinite(v)) throw InvalidParameter("EmpiricalProcessSpec: non-finite function value");
      }
    }
    if (laws.size() != 1 && laws.size() != n) throw InvalidParameter("EmpiricalProcessSpec: need 1 or N member laws");
    for (const auto& p : laws) {
      if (p.size() != m) throw InvalidParameter("EmpiricalProcessSpec: law length differs from base size");
      double s = 0.0;
      for (double x : p) {
        if (!(x >= 0.0)) throw InvalidParameter("EmpiricalProcessSpec: negative probability");
        s += x;
      }
      if (std::abs(s - 1.0) > 1e-9) throw InvalidParameter("EmpiricalProcessSpec: member law does not sum to 1");
    }
  }

  // sup over the class of v_f (or |v_f| for a symmetric class)
  double sup_of(std::span<const double> v) const {
    double s = symmetric_class ? 0.0 : -kInf;
    for (double x : v) s = std::max(s, symmetric_class ? std::abs(x) : x);
    return s;
  }
};

// iid uniform points of {-1, 1}^d with the d coordinate projections, symmetric class:
// S = || sum_i X_i ||_inf.
inline EmpiricalProcessSpec rademacher_projection_spec(std::size_t d, std::size_t n) {
  if (d == 0 || d > 20) throw InvalidParameter("rademacher_projection_spec: d must be in [1, 20]");
  const std::size_t m = std::size_t{1} << d;
  EmpiricalProcessSpec spec;
  spec.n = n;
  spec.symmetric_class = true;
  spec.laws.assign(1, std::vector<double>(m, 1.0 / static_cast<double>(m)));
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> f(m);
    for (std::size_t x = 0; x < m; ++x) f[x] = (x >> j) & 1 ? 1.0 : -1.0;
    spec.functions.push_back(std::move(f));
  }
  return spec;
}

struct Estimate {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  Method method = Method::exact;
  std::size_t samples = 0;
};

struct ProcessStats {
  double U = 0.0;         // || max_i F(X_i) ||_Psi
  Estimate sigma2;        // E sup_f sum_i f(X_i)^2
  Estimate es;            // E S
  double mean_max = 0.0;  // E max_i F(X_i)
  double U_phi = 0.0;     // || max_i F(X_i) ||_Phi, Phi(x) = Psi(x^2)
};

struct TailCurve {
  std::vector<double> t;
  std::vector<double> survival;  // P(|S - E S| >= t)
  std::vector<double> lo;
  std::vector<double> hi;
  Method method = Method::exact;
  std::size_t samples = 0;
};

namespace detail {

// Member laws as scalar distributions over base-point indices.
inline Family index_family(const EmpiricalProcessSpec& spec) {
  auto member = [&](const std::vector<double>& p) {
    std::vector<double> idx(p.size());
    for (std::size_t x = 0; x < p.size(); ++x) idx[x] = static_cast<double>(x);
    return FiniteDist::scalar(std::move(idx), p, 1e-9);
  };
  if (spec.laws.size() == 1) return Family::iid(member(spec.laws.front()), spec.n);
  std::vector<FiniteDist> ms;
  for (const auto& p : spec.laws) ms.push_back(member(p));
  return Family::independent(std::move(ms));
}

// Laws of F(X_i), the envelope at each member.
inline Family envelope_family(const EmpiricalProcessSpec& spec) {
  const auto env = spec.envelope();
  auto member = [&](const std::vector<double>& p) { return FiniteDist::scalar(env, p, 1e-9); };
  if (spec.laws.size() == 1) return Family::iid(member(spec.laws.front()), spec.n);
  std::vector<FiniteDist> ms;
  for (const auto& p : spec.laws) ms.push_back(member(p));
  return Family::independent(std::move(ms));
}

// Image of each member in R^{2|A|}: (f(x))_f followed by (f(x)^2)_f.
inline Family image_family(const EmpiricalProcessSpec& spec) {
  const std::size_t a = spec.functions.size();
  auto member = [&](const std::vector<double>& p) {
    std::vector<double> flat;
    for (std::size_t x = 0; x < p.size(); ++x) {
      for (std::size_t f = 0; f < a; ++f) flat.push_back(spec.functions[f][x]);
      for (std::size_t f = 0; f < a; ++f) flat.push_back(spec.functions[f][x] * spec.functions[f][x]);
    }
    return FiniteDist::vector(2 * a, std::move(flat), p, NormTag::sup, 1e-9);
  };
  if (spec.laws.size() == 1) return Family::iid(member(spec.laws.front()), spec.n);
  std::vector<FiniteDist> ms;
  for (const auto& p : spec.laws) ms.push_back(member(p));
  return Family::independent(std::move(ms));
}

// Exact joint law of (sum_i f(X_i))_f and (sum_i f(X_i)^2)_f, or empty when it
// does not fit the budget.
inline std::optional<FiniteDist> exact_image_sum(const EmpiricalProcessSpec& spec, std::size_t budget) {
  if (2 * spec.functions.size() > kMaxDim) return std::nullopt;
  try {
    return sum_distribution_general(image_family(spec), budget);
  } catch (const ResourceError&) {
    return std::nullopt;
  }
}

struct SectionedMean {
  double value, lo, hi;
};

// Mean over all rows, with a t interval from 16 contiguous sections.
inline SectionedMean sectioned_mean(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  double total = 0.0;
  for (double x : xs) total += x;
  double mean = 0.0, m2 = 0.0;
  for (int s = 0; s < kSections; ++s) {
    const std::size_t b = n * static_cast<std::size_t>(s) / kSections;
    const std::size_t e = n * static_cast<std::size_t>(s + 1) / kSections;
    double v = 0.0;
    for (std::size_t i = b; i < e; ++i) v += xs[i];
    v /= static_cast<double>(e - b);
    const double delta = v - mean;
    mean += delta / (s + 1);
    m2 += delta * (v - mean);
  }
  const double half = kT975Df15 * std::sqrt(m2 / (kSections - 1)) / std::sqrt(static_cast<double>(kSections));
  const double value = total / static_cast<double>(n);
  return {value, value - half, value + half};
}

inline std::vector<double> default_t_grid(double t_max, std::size_t points = 24) {
  std::vector<double> g;
  if (!(t_max > 0)) t_max = 1.0;
  for (std::size_t i = 1; i <= points; ++i) g.push_back(t_max * static_cast<double>(i) / static_cast<double>(points));
  return g;
}

}  // namespace detail

struct ProcessOptions {
  std::size_t samples = 100'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool prefer_exact = false;
  std::vector<double> t_grid;  // empty: 24 equally spaced points up to max |S - E S|
  std::size_t budget = kDefaultAtomBudget;
};

struct ProcessResult {
  ProcessStats stats;
  TailCurve curve;
};

// Per-row samples of S and of sup_f sum_i f(X_i)^2.
struct ProcessSamples {
  std::vector<double> s;
  std::vector<double> sigma;
};

inline ProcessSamples sample_process(const EmpiricalProcessSpec& spec, std::size_t n, std::uint64_t seed,
                                     unsigned threads) {
  const Family fam = detail::index_family(spec);
  const SampleMatrix m = sample(fam, n, seed, threads);
  const std::size_t a = spec.functions.size();
  ProcessSamples out{std::vector<double>(n), std::vector<double>(n)};
  parallel_rows(n, threads, [&](std::size_t b, std::size_t e) {
    std::vector<double> sum(a), sq(a);
    for (std::size_t r = b; r < e; ++r) {
      std::fill(sum.begin(), sum.end(), 0.0);
      std::fill(sq.begin(), sq.end(), 0.0);
      for (std::size_t i = 0; i < m.cols; ++i) {
        const auto x = static_cast<std::size_t>(fam.member(i).value(m.at(r, i)));
        for (std::size_t f = 0; f < a; ++f) {
          const double v = spec.functions[f][x];
          sum[f] += v;
          sq[f] += v * v;
        }
      }
      out.s[r] = spec.sup_of(sum);
      out.sigma[r] = *std::max_element(sq.begin(), sq.end());
    }
  });
  return out;
}

inline ProcessResult empirical_process_tail(const EmpiricalProcessSpec& spec, const OrliczFunction& psi,
                                            const ProcessOptions& opt) {
  spec.validate();
  ProcessResult res;
  const FiniteDist mx = max_distribution(detail::envelope_family(spec), opt.budget);
  res.stats.U = norm_exact(mx, psi).value;
  res.stats.U_phi = norm_exact(mx, psi.square_composed()).value;
  res.stats.mean_max = l1_exact(mx);

  std::optional<FiniteDist> joint;
  if (opt.prefer_exact) joint = detail::exact_image_sum(spec, opt.budget);
  TailCurve& c = res.curve;
  if (joint) {
    const std::size_t a = spec.functions.size();
    std::vector<double> sv(joint->size()), lp(joint->size());
    double es = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < joint->size(); ++i) {
      const auto p = joint->point(i);
      sv[i] = spec.sup_of(p.subspan(0, a));
      const double sig = *std::max_element(p.begin() + static_cast<std::ptrdiff_t>(a), p.end());
      lp[i] = joint->log_prob(i);
      es += joint->prob(i) * sv[i];
      s2 += joint->prob(i) * sig;
    }
    res.stats.es = {es, es, es, Method::exact, 0};
    res.stats.sigma2 = {s2, s2, s2, Method::exact, 0};
    double dev_max = 0.0;
    for (double s : sv) dev_max = std::max(dev_max, std::abs(s - es));
    c.t = opt.t_grid.empty() ? detail::default_t_grid(dev_max) : opt.t_grid;
    c.method = Method::exact;
    for (double t : c.t) {
      LogSumAccumulator acc;
      for (std::size_t i = 0; i < sv.size(); ++i) {
        if (std::abs(sv[i] - es) >= t) acc.add(lp[i]);
      }
      const double p = std::exp(acc.value());
      c.survival.push_back(p);
      c.lo.push_back(p);
      c.hi.push_back(p);
    }
    return res;
  }

  if (opt.samples < 1000) throw InvalidParameter("empirical_process_tail: need at least 1000 samples");
  const ProcessSamples ps = sample_process(spec, opt.samples, opt.seed, opt.threads);
  const auto es = detail::sectioned_mean(ps.s);
  const auto s2 = detail::sectioned_mean(ps.sigma);
  res.stats.es = {es.value, es.lo, es.hi, Method::monte_carlo, opt.samples};
  res.stats.sigma2 = {s2.value, s2.lo, s2.hi, Method::monte_carlo, opt.samples};
  std::vector<double> dev(ps.s.size());
  double dev_max = 0.0;
  for (std::size_t r = 0; r < dev.size(); ++r) {
    dev[r] = std::abs(ps.s[r] - es.value);
    dev_max = std::max(dev_max, dev[r]);
  }
  c.t = opt.t_grid.empty() ? detail::default_t_grid(dev_max) : opt.t_grid;
  c.method = Method::monte_carlo;
  c.samples = opt.samples;
  std::vector<double> ind(dev.size());
  for (double t : c.t) {
    for (std::size_t r = 0; r < dev.size(); ++r) ind[r] = dev[r] >= t ? 1.0 : 0.0;
    const auto m = detail::sectioned_mean(ind);
    c.survival.push_back(m.value);
    c.lo.push_back(std::clamp(m.lo, 0.0, 1.0));
    c.hi.push_back(std::clamp(m.hi, 0.0, 1.0));
  }
  return res;
}

// Default calibration grid 2^-10, 2^-9, ..., 2^4
inline std::vector<double> default_c_grid() {
  std::vector<double> g;
  for (int e = -10; e <= 4; ++e) g.push_back(std::ldexp(1.0, e));
  return g;
}

struct Calibration {
  BoundId bound = BoundId::bennett;
  std::vector<double> c_grid;
  std::vector<bool> feasible;
  std::optional<double> c;  // largest feasible grid value
};

inline double bound_value(BoundId id, double t, double c, const ProcessStats& st, const OrliczFunction& psi) {
  switch (id) {
    case BoundId::bennett: return bennett_rhs(t, st.U, st.sigma2.value, c, psi).raw;
    case BoundId::bernstein: return bernstein_rhs(t, st.U, st.sigma2.value, c, psi).raw;
    case BoundId::convex: return convex_rhs(t, st.mean_max, st.U_phi, c, psi.square_composed()).raw;
  }
  return 0.0;
}

// Every bound is non-increasing in c, so feasible values form an initial segment
// of the ascending grid; the largest one is the sharpest constant the data allow.
inline Calibration calibrate_c(const TailCurve& curve, BoundId bound, const ProcessStats& stats,
                               const OrliczFunction& psi, std::vector<double> c_grid = default_c_grid()) {
  if (c_grid.empty()) throw InvalidParameter("calibrate_c: empty c grid");
  std::sort(c_grid.begin(), c_grid.end());
  Calibration cal;
  cal.bound = bound;
  cal.c_grid = c_grid;
  for (double c : c_grid) {
    bool ok = true;
    for (std::size_t i = 0; i < curve.t.size() && ok; ++i) ok = bound_value(bound, curve.t[i], c, stats, psi) >= curve.hi[i];
    cal.feasible.push_back(ok);
    if (ok) cal.c = c;
  }
  return cal;
}

// ---------------------------------------------------------------------------
// Bennett against Bernstein for at-most-exponential Psi

struct BoundRatioCheck {
  bool growth_ok = false;  // ln Psi(x)/x stays bounded on the grid
  double growth_top = 0.0;
  double growth_prev = 0.0;
  std::vector<double> t;
  std::vector<double> ratio;  // bennett / bernstein
  double max_ratio = 0.0;
  double max_reverse_ratio = 0.0;  // bernstein / bennett
  bool bounded = false;
};

// Top-decade max of ln Psi(x)/x on [1e5, 1e6] at most twice the previous decade's.
inline bool exponential_growth_test(const OrliczFunction& psi, double* top = nullptr, double* prev = nullptr) {
  double m_top = 0.0, m_prev = 0.0;
  for (double x : log_grid(1e4, 1e6, 41)) {
    const double g = psi.log_value(x) / x;
    (x >= 1e5 ? m_top : m_prev) = std::max(x >= 1e5 ? m_top : m_prev, g);
  }
  if (top) *top = m_top;
  if (prev) *prev = m_prev;
  return m_top <= 2.0 * m_prev;
}

inline BoundRatioCheck bennett_bernstein_ratio(const OrliczFunction& psi, double U, double sigma2, double c,
                                               const std::vector<double>& t_grid, double limit = 10.0) {
  BoundRatioCheck r;
  r.growth_ok = exponential_growth_test(psi, &r.growth_top, &r.growth_prev);
  r.t = t_grid;
  for (double t : t_grid) {
    const double a = bennett_rhs(t, U, sigma2, c, psi).raw;
    const double b = bernstein_rhs(t, U, sigma2, c, psi).raw;
    r.ratio.push_back(a / b);
    r.max_ratio = std::max(r.max_ratio, a / b);
    r.max_reverse_ratio = std::max(r.max_reverse_ratio, b / a);
  }
  r.bounded = r.growth_ok && r.max_ratio <= limit;
  return r;
}

// ---------------------------------------------------------------------------
// Sign-symmetrized tail against the crucial inequality

struct CrucialLemmaParams {
  int q = 2;
  int k = 1;
  double u = 1.0;
  double u_prime = 1.0;
};

enum class CrucialMode { automatic, exact, monte_carlo };

struct CrucialLemmaResult {
  CrucialLemmaParams params;
  double M = 0.0;  // E || sum_i eps_i X_i ||
  Method m_method = Method::exact;
  double lhs = 0.0;  // P(|| sum eps X || >= q^2 M + u + u')
  double lhs_stderr = 0.0;
  Method lhs_method = Method::exact;
  double order_tail = 0.0;  // P(Y_1 + ... + Y_k >= u')
  Method tail_method = Method::exact;
  double rhs = 0.0;
  double margin_se = kInf;  // (rhs - lhs) / stderr
  bool pass = false;
};

namespace detail {

// Exact P(top-k sum of ||X_i|| >= level) for each level, or empty when infeasible.
inline std::optional<std::vector<double>> exact_top_k_tail(const Family& fam, int k, const std::vector<double>& levels,
                                                           std::size_t budget) {
  const std::size_t N = fam.size();
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), N);
  std::vector<LogSumAccumulator> acc(levels.size());
  auto record = [&](double lp, double sum) {
    for (std::size_t j = 0; j < levels.size(); ++j) {
      if (sum >= levels[j] - 1e-12 * std::max(1.0, std::abs(levels[j]))) acc[j].add(lp);
    }
  };
  if (fam.is_iid()) {
    const FiniteDist law = norm_distribution(fam.member(0));
    const std::size_t L = law.size();
    // ln P(||X|| <= a_j)
    std::vector<double> lcdf(L);
    LogSumAccumulator c;
    for (std::size_t j = 0; j < L; ++j) {
      c.add(law.log_prob(j));
      lcdf[j] = std::min(c.value(), 0.0);
    }
    std::size_t nodes = 0;
    bool over = false;
    // remaining r items are all <= a_j; m of the top k already placed with sum s
    std::function<void(std::ptrdiff_t, std::size_t, std::size_t, double, double)> go =
        [&](std::ptrdiff_t j, std::size_t r, std::size_t m, double s, double lp) {
          if (over) return;
          if (++nodes > budget) {
            over = true;
            return;
          }
          if (m >= kk || r == 0 || j < 0) {
            record(lp, s);
            return;
          }
          const double a = law.value(static_cast<std::size_t>(j));
          if (j == 0 || a == 0.0) {
            record(lp, s + a * static_cast<double>(std::min(r, kk - m)));
            return;
          }
          // conditional level probability given <= a_j
          const double lq = law.log_prob(static_cast<std::size_t>(j)) - lcdf[static_cast<std::size_t>(j)];
          const double lq0 = lcdf[static_cast<std::size_t>(j) - 1] - lcdf[static_cast<std::size_t>(j)];
          for (std::size_t cnt = 0; cnt <= r; ++cnt) {
            const double lb = log_binomial(static_cast<std::int64_t>(r), static_cast<std::int64_t>(cnt)) +
                              (cnt ? static_cast<double>(cnt) * lq : 0.0) +
                              (r - cnt ? static_cast<double>(r - cnt) * lq0 : 0.0);
            if (lb == kNegInf) continue;
            const std::size_t take = std::min(cnt, kk - m);
            go(j - 1, r - cnt, m + take, s + a * static_cast<double>(take), lp + lb);
            if (m + cnt >= kk) {
              // every larger count yields the same top-k sum
              LogSumAccumulator rest;
              for (std::size_t c2 = cnt + 1; c2 <= r; ++c2) {
                rest.add(log_binomial(static_cast<std::int64_t>(r), static_cast<std::int64_t>(c2)) +
                         static_cast<double>(c2) * lq + (r - c2 ? static_cast<double>(r - c2) * lq0 : 0.0));
              }
              if (rest.value() != kNegInf) record(lp + rest.value(), s + a * static_cast<double>(take));
              break;
            }
          }
        };
    go(static_cast<std::ptrdiff_t>(L) - 1, N, 0, 0.0, 0.0);
    if (over) return std::nullopt;
  } else {
    if (fam.joint_support_size() > static_cast<double>(budget)) return std::nullopt;
    std::vector<FiniteDist> laws;
    for (std::size_t i = 0; i < N; ++i) laws.push_back(norm_distribution(fam.member(i)));
    std::vector<std::size_t> idx(N, 0);
    std::vector<double> ys(N);
    while (true) {
      double lp = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        ys[i] = laws[i].value(idx[i]);
        lp += laws[i].log_prob(idx[i]);
      }
      std::partial_sort(ys.begin(), ys.begin() + static_cast<std::ptrdiff_t>(kk), ys.end(), std::greater<>());
      double s = 0.0;
      for (std::size_t r = 0; r < kk; ++r) s += ys[r];
      record(lp, s);
      std::size_t i = 0;
      while (i < N && ++idx[i] == laws[i].size()) idx[i++] = 0;
      if (i == N) break;
    }
  }
  std::vector<double> out;
  for (auto& a : acc) out.push_back(std::min(1.0, std::exp(a.value())));
  return out;
}

}  // namespace detail

struct CrucialOptions {
  CrucialMode mode = CrucialMode::automatic;
  std::size_t samples = 100'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::size_t budget = kDefaultAtomBudget;
};

// Evaluates every parameter set against one law (or one sample) of the family.
inline std::vector<CrucialLemmaResult> crucial_lemma_check(const Family& fam,
                                                           const std::vector<CrucialLemmaParams>& params,
                                                           const CrucialOptions& opt) {
  for (const auto& p : params) {
    if (p.q < 2 || p.k < 1) throw InvalidParameter("crucial_lemma_check: need q >= 2 and k >= 1");
    if (!(p.u > 0) || !(p.u_prime > 0)) throw InvalidParameter("crucial_lemma_check: u and u' must be positive");
  }
  std::optional<FiniteDist> sym;
  if (opt.mode != CrucialMode::monte_carlo) {
    try {
      sym = rademacher_sum_distribution(fam, opt.budget);
    } catch (const ResourceError&) {
      if (opt.mode == CrucialMode::exact) throw;
    }
  }
  std::vector<double> norms_s;  // MC samples of || sum eps X ||
  std::vector<std::vector<double>> top;  // MC samples of top-k sums, per distinct k
  std::vector<int> ks;
  for (const auto& p : params) {
    if (std::find(ks.begin(), ks.end(), p.k) == ks.end()) ks.push_back(p.k);
  }
  const bool mc_lhs = opt.mode == CrucialMode::monte_carlo || !sym;
  const std::size_t N = fam.size();
  if (mc_lhs) {
    if (opt.samples < 1000) throw InvalidParameter("crucial_lemma_check: need at least 1000 samples");
    const SampleMatrix m = sample(fam, opt.samples, opt.seed, opt.threads);
    norms_s.assign(opt.samples, 0.0);
    top.assign(ks.size(), std::vector<double>(opt.samples, 0.0));
    const std::size_t d = fam.dim();
    parallel_rows(opt.samples, opt.threads, [&](std::size_t b, std::size_t e) {
      std::vector<double> acc(d), ys(N);
      for (std::size_t r = b; r < e; ++r) {
        RowRng signs(opt.seed, 1, r);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = 0; i < N; ++i) {
          const auto& mem = fam.member(i);
          const std::uint32_t a = m.at(r, i);
          const double eps = signs.sign();
          const auto pt = mem.point(a);
          for (std::size_t j = 0; j < d; ++j) acc[j] += eps * pt[j];
          ys[i] = mem.norm_of(a);
        }
        norms_s[r] = apply_norm(fam.norm_tag(), acc);
        std::sort(ys.begin(), ys.end(), std::greater<>());
        for (std::size_t q = 0; q < ks.size(); ++q) {
          double s = 0.0;
          for (std::size_t i = 0; i < std::min<std::size_t>(static_cast<std::size_t>(ks[q]), N); ++i) s += ys[i];
          top[q][r] = s;
        }
      }
    });
  }
  double M;
  Method m_method;
  if (sym) {
    M = l1_exact(*sym);
    m_method = Method::exact;
  } else {
    M = detail::sectioned_mean(norms_s).value;
    m_method = Method::monte_carlo;
  }

  std::vector<CrucialLemmaResult> out;
  for (const auto& p : params) {
    CrucialLemmaResult r;
    r.params = p;
    r.M = M;
    r.m_method = m_method;
    const double q = p.q;
    const double level = q * q * M + p.u + p.u_prime;
    if (mc_lhs) {
      std::vector<double> ind(norms_s.size());
      for (std::size_t i = 0; i < ind.size(); ++i) ind[i] = norms_s[i] >= level ? 1.0 : 0.0;
      const auto sm = detail::sectioned_mean(ind);
      r.lhs = sm.value;
      r.lhs_stderr = (sm.hi - sm.value) / kT975Df15;
      r.lhs_method = Method::monte_carlo;
    } else {
      r.lhs = sym->tail(level - 1e-12 * std::max(1.0, level));
      r.lhs_method = Method::exact;
    }
    const auto exact_tail = opt.mode == CrucialMode::monte_carlo && !sym
                                ? std::nullopt
                                : detail::exact_top_k_tail(fam, p.k, {p.u_prime}, opt.budget);
    if (exact_tail) {
      r.order_tail = exact_tail->front();
      r.tail_method = Method::exact;
    } else {
      if (!mc_lhs) throw ResourceError("crucial_lemma_check: order-statistic tail needs Monte Carlo samples");
      const auto qk = static_cast<std::size_t>(std::find(ks.begin(), ks.end(), p.k) - ks.begin());
      double cnt = 0.0;
      for (double s : top[qk]) cnt += s >= p.u_prime ? 1.0 : 0.0;
      r.order_tail = cnt / static_cast<double>(top[qk].size());
      r.tail_method = Method::monte_carlo;
    }
    const double gauss = M > 0.0 ? std::exp(-p.u * p.u / (16.0 * q * q * q * M * M)) : 0.0;
    r.rhs = gauss + 4.0 / std::pow(q, p.k + 1) + r.order_tail;
    const double slack = r.lhs_method == Method::exact ? 1e-12 : 3.0 * r.lhs_stderr;
    r.pass = r.lhs <= r.rhs + slack;
    r.margin_se = r.lhs_stderr > 0.0 ? (r.rhs - r.lhs) / r.lhs_stderr : (r.rhs >= r.lhs ? kInf : -kInf);
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binomial against Poisson tails for the centered Bernoulli family

// ln P(Z >= m), Z ~ Poisson(lambda)
inline double log_poisson_tail(double lambda, std::int64_t m) {
  if (m <= 0) return 0.0;
  if (!(lambda > 0)) throw InvalidParameter("log_poisson_tail: lambda must be positive");
  const double ll = std::log(lambda);
  if (static_cast<double>(m) <= lambda) {
    // complement of the lower part
    LogSumAccumulator low;
    for (std::int64_t j = 0; j < m; ++j) low.add(-lambda + static_cast<double>(j) * ll - std::lgamma(static_cast<double>(j) + 1.0));
    return log1m_exp(std::min(low.value(), 0.0));
  }
  LogSumAccumulator acc;
  double first = kNegInf;
  for (std::int64_t j = m;; ++j) {
    const double t = -lambda + static_cast<double>(j) * ll - std::lgamma(static_cast<double>(j) + 1.0);
    if (j == m) first = t;
    acc.add(t);
    if (t < first - 50.0) break;
  }
  return acc.value();
}

// ln P(K >= m), K ~ Binomial(n, p), p given by its logarithm
inline double log_binomial_tail(std::int64_t n, double log_p, std::int64_t m) {
  if (m <= 0) return 0.0;
  if (m > n) return kNegInf;
  const double lq = log1m_exp(std::min(log_p, 0.0));
  auto term = [&](std::int64_t j) {
    return log_binomial(n, j) + static_cast<double>(j) * log_p + (n - j ? static_cast<double>(n - j) * lq : 0.0);
  };
  const double mean = static_cast<double>(n) * std::exp(log_p);
  if (static_cast<double>(m) <= mean) {
    LogSumAccumulator low;
    for (std::int64_t j = 0; j < m; ++j) low.add(term(j));
    return log1m_exp(std::min(low.value(), 0.0));
  }
  LogSumAccumulator acc;
  const double first = term(m);
  for (std::int64_t j = m; j <= n; ++j) {
    const double t = term(j);
    acc.add(t);
    if (t < first - 50.0) break;
  }
  return acc.value();
}

struct PoissonCell {
  double s = 0.0;
  double u = 0.0;
  std::size_t n = 0;
  double log_binomial_tail = 0.0;  // ln P(S_N >= s)
  double log_poisson_tail = 0.0;   // ln P(Z >= ceil(2s))
  double exponent = 0.0;           // s ln(1+s) + s psi(u)
  double c_needed = 0.0;           // smallest C with exp(-C^2 exponent) <= P(S_N >= s)
  bool dominates_poisson = false;  // P(S_N >= s) >= P(Z >= ceil(2s))
};

struct PoissonDiscrepancy {
  double s = 0.0;
  double u = 0.0;
  std::vector<std::size_t> n;
  std::vector<double> value;  // |P(S_N >= s) - P(Z >= s + 1/Psi(u))|
  bool non_increasing = true;
};

struct PoissonReport {
  std::vector<PoissonCell> cells;
  double c_fitted = 0.0;
  bool dominates_poisson = true;
  std::vector<PoissonDiscrepancy> discrepancy;
  bool discrepancy_non_increasing = true;
};

// u-grid Psi^{-1}(2), Psi^{-1}(4), Psi^{-1}(16), Psi^{-1}(256)
inline std::vector<double> default_poisson_u_grid(const OrliczFunction& psi) {
  std::vector<double> g;
  for (double y : {2.0, 4.0, 16.0, 256.0}) g.push_back(psi.invert(y));
  return g;
}

// P(S_N >= s) with S_N = K - 1/Psi(u), K ~ Binomial(N, 1/(N Psi(u)))
inline double log_centered_bernoulli_tail(const OrliczFunction& psi, double u, std::size_t n, double s) {
  const double lpsi = psi.log_value(u);
  const double lq = std::log(static_cast<double>(n)) + lpsi;
  if (!(lq > 0)) throw InvalidParameter("poisson_check: N Psi(u) must exceed 1");
  const auto m = static_cast<std::int64_t>(std::ceil(s + std::exp(-lpsi) - 1e-12));
  return log_binomial_tail(static_cast<std::int64_t>(n), -lq, m);
}

inline PoissonReport poisson_check(const OrliczFunction& psi, const std::vector<double>& u_grid,
                                   const std::vector<double>& s_grid, std::size_t n,
                                   const std::vector<std::size_t>& n_sweep = {100, 1000, 10000}) {
  if (u_grid.empty() || s_grid.empty()) throw InvalidParameter("poisson_check: grids must be nonempty");
  PoissonReport rep;
  for (double s : s_grid) {
    if (!(s > 0)) throw InvalidParameter("poisson_check: s must be positive");
    for (double u : u_grid) {
      PoissonCell c;
      c.s = s;
      c.u = u;
      c.n = n;
      const double lpsi = psi.log_value(u);
      c.log_binomial_tail = log_centered_bernoulli_tail(psi, u, n, s);
      c.log_poisson_tail = log_poisson_tail(std::exp(-lpsi), static_cast<std::int64_t>(std::ceil(2.0 * s)));
      c.exponent = s * std::log1p(s) + s * psi.psi(u);
      c.c_needed = std::sqrt(std::max(0.0, -c.log_binomial_tail) / c.exponent);
      c.dominates_poisson = c.log_binomial_tail >= c.log_poisson_tail;
      rep.c_fitted = std::max(rep.c_fitted, c.c_needed);
      rep.dominates_poisson = rep.dominates_poisson && c.dominates_poisson;
      rep.cells.push_back(c);

      PoissonDiscrepancy d;
      d.s = s;
      d.u = u;
      const double lim = log_poisson_tail(std::exp(-lpsi), static_cast<std::int64_t>(std::ceil(s + std::exp(-lpsi) - 1e-12)));
      double prev = kInf;
      for (std::size_t nn : n_sweep) {
        const double lb = log_centered_bernoulli_tail(psi, u, nn, s);
        const double diff = std::exp(log_sub_exp(std::max(lb, lim), std::min(lb, lim)));
        d.n.push_back(nn);
        d.value.push_back(diff);
        if (diff > prev * (1.0 + 1e-9)) d.non_increasing = false;
        prev = diff;
      }
      rep.discrepancy_non_increasing = rep.discrepancy_non_increasing && d.non_increasing;
      rep.discrepancy.push_back(std::move(d));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Strong variance against its weak-variance decomposition

struct WeakVarianceReport {
  double term1 = 0.0;  // sup_f sum_i E f(X_i)^2
  double term2 = 0.0;  // 32 sqrt(E max_i F(X_i)^2) E sup_f |sum_i f(X_i)|
  double term3 = 0.0;  // 8 E max_i F(X_i)^2
  Estimate sigma2;
  Estimate abs_sup;  // E sup_f |sum_i f(X_i)|
  bool holds = false;
};

inline WeakVarianceReport weak_variance_terms(const EmpiricalProcessSpec& spec, const ProcessOptions& opt) {
  spec.validate();
  const std::size_t a = spec.functions.size();
  for (std::size_t i = 0; i < spec.laws.size(); ++i) {
    for (const auto& f : spec.functions) {
      double m = 0.0, scale = 0.0;
      for (std::size_t x = 0; x < f.size(); ++x) {
        m += spec.laws[i][x] * f[x];
        scale = std::max(scale, std::abs(f[x]));
      }
      if (std::abs(m) > 1e-9 * (1.0 + scale)) throw DomainError("weak_variance_terms: class is not centered (E f(X_i) != 0)");
    }
  }
  WeakVarianceReport w;
  for (const auto& f : spec.functions) {
    double t = 0.0;
    for (std::size_t i = 0; i < spec.n; ++i) {
      const auto& p = spec.law(i);
      for (std::size_t x = 0; x < f.size(); ++x) t += p[x] * f[x] * f[x];
    }
    w.term1 = std::max(w.term1, t);
  }
  const FiniteDist mx = max_distribution(detail::envelope_family(spec), opt.budget);
  double e_max_sq = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) e_max_sq += mx.prob(i) * mx.value(i) * mx.value(i);
  w.term3 = 8.0 * e_max_sq;

  EmpiricalProcessSpec abs_spec = spec;
  abs_spec.symmetric_class = true;
  std::optional<FiniteDist> joint;
  if (opt.prefer_exact) joint = detail::exact_image_sum(spec, opt.budget);
  if (joint) {
    double s2 = 0.0, as = 0.0;
    for (std::size_t i = 0; i < joint->size(); ++i) {
      const auto p = joint->point(i);
      s2 += joint->prob(i) * *std::max_element(p.begin() + static_cast<std::ptrdiff_t>(a), p.end());
      as += joint->prob(i) * abs_spec.sup_of(p.subspan(0, a));
    }
    w.sigma2 = {s2, s2, s2, Method::exact, 0};
    w.abs_sup = {as, as, as, Method::exact, 0};
  } else {
    if (opt.samples < 1000) throw InvalidParameter("weak_variance_terms: need at least 1000 samples");
    const ProcessSamples ps = sample_process(abs_spec, opt.samples, opt.seed, opt.threads);
    const auto s2 = detail::sectioned_mean(ps.sigma);
    const auto as = detail::sectioned_mean(ps.s);
    w.sigma2 = {s2.value, s2.lo, s2.hi, Method::monte_carlo, opt.samples};
    w.abs_sup = {as.value, as.lo, as.hi, Method::monte_carlo, opt.samples};
  }
  w.term2 = 32.0 * std::sqrt(e_max_sq) * w.abs_sup.value;
  w.holds = w.sigma2.value <= w.term1 + w.term2 + w.term3;
  return w;
}

}  // namespace hjorlicz
