#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "finite_dist.hpp"
#include "numeric.hpp"
#include "orlicz_function.hpp"
#include "rng.hpp"

namespace hjorlicz {

inline constexpr std::size_t kDefaultAtomBudget = 2'000'000;

// P(X = +-u) = 1/(2 N Psi(u)), P(X = 0) = 1 - 1/(N Psi(u))
inline FiniteDist make_three_point(const OrliczFunction& psi, double u, std::size_t n) {
  if (!(u > 0) || n == 0) throw InvalidParameter("make_three_point: need u > 0 and N >= 1");
  const double lq = std::log(static_cast<double>(n)) + psi.log_value(u);  // ln(N Psi(u))
  if (!(lq > 0)) throw InvalidParameter("make_three_point: N Psi(u) must exceed 1");
  const double lpm = -std::numbers::ln2 - lq;
  const double lp0 = log1m_exp(-lq);
  return FiniteDist::scalar_log({-u, 0.0, u}, {lpm, lp0, lpm});
}

// Atoms 1 - p (prob p) and -p (prob 1 - p) with p = 1/(N Psi(u))
inline FiniteDist make_centered_bernoulli(const OrliczFunction& psi, double u, std::size_t n) {
  if (!(u > 0) || n == 0) throw InvalidParameter("make_centered_bernoulli: need u > 0 and N >= 1");
  const double lq = std::log(static_cast<double>(n)) + psi.log_value(u);
  if (!(lq > 0)) throw InvalidParameter("make_centered_bernoulli: N Psi(u) must exceed 1");
  const double p = std::exp(-lq);
  return FiniteDist::scalar_log({1.0 - p, -p}, {-lq, log1m_exp(-lq)});
}

// Exact law of max_i ||X_i|| from the per-member distribution functions.
inline FiniteDist max_distribution(const Family& fam, std::size_t budget = kDefaultAtomBudget) {
  std::vector<double> levels;
  const std::size_t distinct_members = fam.is_iid() ? 1 : fam.size();
  for (std::size_t i = 0; i < distinct_members; ++i) {
    const auto nm = fam.member(i).norms();
    levels.insert(levels.end(), nm.begin(), nm.end());
    if (levels.size() > 4 * budget) break;
  }
  std::sort(levels.begin(), levels.end());
  std::vector<double> uniq;
  for (double x : levels) {
    if (uniq.empty() || x - uniq.back() > kAtomMergeTol) uniq.push_back(x);
  }
  if (uniq.size() > budget) {
    throw ResourceError("max_distribution: " + std::to_string(uniq.size()) +
                        " distinct levels exceed the atom budget; use the Monte Carlo path");
  }
  // ln P(max <= level_j) = sum_i ln(1 - P(||X_i|| > level_j)). The survival
  // function is kept separately: when every member tail is below e^-40 it is the
  // log-sum of the tails, which survives tails far beyond double range.
  const std::size_t L = uniq.size();
  std::vector<double> log_cdf(L, 0.0);
  std::vector<LogSumAccumulator> tails(L);
  auto add_member = [&](const FiniteDist& d, double weight) {
    const auto nm = d.norms();
    for (std::size_t j = 0; j < L; ++j) {
      LogSumAccumulator above;
      for (std::size_t a = 0; a < d.size(); ++a) {
        if (nm[a] > uniq[j] + kAtomMergeTol) above.add(d.log_prob(a));
      }
      const double ls = std::min(above.value(), 0.0);
      log_cdf[j] += weight * log1m_exp(ls);
      if (ls != kNegInf) tails[j].add(std::log(weight) + ls);
    }
  };
  if (fam.is_iid()) {
    add_member(fam.member(0), static_cast<double>(fam.size()));
  } else {
    for (std::size_t i = 0; i < fam.size(); ++i) add_member(fam.member(i), 1.0);
  }
  std::vector<double> log_surv(L);
  for (std::size_t j = 0; j < L; ++j) {
    const double lt = tails[j].value();
    log_surv[j] = lt < -40.0 ? lt : log1m_exp(std::min(log_cdf[j], 0.0));
  }
  std::vector<double> lp(L);
  for (std::size_t j = 0; j < L; ++j) {
    if (j == 0) {
      lp[j] = log_surv[0] < -40.0 ? log1m_exp(log_surv[0]) : log_cdf[0];
    } else if (log_cdf[j - 1] < -std::numbers::ln2) {
      lp[j] = log_sub_exp(std::max(log_cdf[j], log_cdf[j - 1]), log_cdf[j - 1]);
    } else {
      // Difference of survival probabilities avoids cancellation near 1.
      const double s_prev = log_surv[j - 1];
      lp[j] = s_prev == kNegInf ? kNegInf : log_sub_exp(s_prev, std::min(log_surv[j], s_prev));
    }
  }
  return FiniteDist::scalar_log(std::move(uniq), std::move(lp), 1e-10);
}

namespace detail {

struct LatticeLaw {
  double u = 0;
  double lm = kNegInf;  // ln P(X = -u)
  double l0 = kNegInf;  // ln P(X = 0)
  double lp = kNegInf;  // ln P(X = +u)
};

inline LatticeLaw as_lattice(const FiniteDist& d) {
  if (!d.is_scalar()) throw InvalidParameter("sum_distribution_iid_lattice: scalar law required");
  LatticeLaw L;
  for (std::size_t i = 0; i < d.size(); ++i) L.u = std::max(L.u, std::abs(d.value(i)));
  const double tol = 1e-12 * std::max(1.0, L.u);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double v = d.value(i);
    if (std::abs(v) <= tol) {
      L.l0 = d.log_prob(i);
    } else if (std::abs(v - L.u) <= tol) {
      L.lp = d.log_prob(i);
    } else if (std::abs(v + L.u) <= tol) {
      L.lm = d.log_prob(i);
    } else {
      throw InvalidParameter("sum_distribution_iid_lattice: atoms must lie in {-u, 0, u}");
    }
  }
  return L;
}

inline double log_factorial(double n) { return std::lgamma(n + 1.0); }

}  // namespace detail

// Exact law of X_1 + ... + X_N for iid X on {-u, 0, u}: multinomial sum over
// (count-, count0, count+) grouped by net count m = count+ - count-.
inline FiniteDist sum_distribution_iid_lattice(const FiniteDist& d, std::size_t n) {
  if (n == 0) throw InvalidParameter("sum_distribution_iid_lattice: N must be >= 1");
  if (n > 1'000'000) throw ResourceError("sum_distribution_iid_lattice: N above 10^6");
  const auto L = detail::as_lattice(d);
  const auto N = static_cast<std::int64_t>(n);
  const double lfN = detail::log_factorial(static_cast<double>(N));
  auto term = [&](std::int64_t a, std::int64_t m) {
    const std::int64_t c = a + m;
    const std::int64_t b = N - a - c;
    double t = lfN - detail::log_factorial(static_cast<double>(a)) - detail::log_factorial(static_cast<double>(b)) -
               detail::log_factorial(static_cast<double>(c));
    if (a > 0) t += a * L.lm;
    if (b > 0) t += b * L.l0;
    if (c > 0) t += c * L.lp;
    return t;
  };
  const bool degenerate = L.lm == kNegInf || L.l0 == kNegInf || L.lp == kNegInf;
  std::vector<double> values;
  std::vector<double> lps;
  for (std::int64_t m = -N; m <= N; ++m) {
    const std::int64_t a_lo = std::max<std::int64_t>(0, -m);
    const std::int64_t a_hi = (N - m) / 2;  // b = N - 2a - m >= 0
    if (a_hi < a_lo) continue;
    LogSumAccumulator acc;
    if (degenerate) {
      for (std::int64_t a = a_lo; a <= a_hi; ++a) {
        const std::int64_t c = a + m;
        const std::int64_t b = N - a - c;
        if ((a > 0 && L.lm == kNegInf) || (b > 0 && L.l0 == kNegInf) || (c > 0 && L.lp == kNegInf)) continue;
        acc.add(term(a, m));
      }
    } else {
      // The terms are log-concave in a; start at the mode and walk outwards
      // until they fall 45 nats below the peak.
      const double rho = L.lm + L.lp - 2.0 * L.l0;
      auto ratio_ge_one = [&](std::int64_t a) {
        const std::int64_t b = N - 2 * a - m;
        if (b < 2) return false;
        return std::log(static_cast<double>(b)) + std::log(static_cast<double>(b - 1)) -
                   std::log(static_cast<double>(a + 1)) - std::log(static_cast<double>(a + m + 1)) + rho >=
               0.0;
      };
      std::int64_t lo = a_lo, hi = a_hi;
      while (lo < hi) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (ratio_ge_one(mid)) {
          lo = mid + 1;
        } else {
          hi = mid;
        }
      }
      const std::int64_t mode = lo;
      const double peak = term(mode, m);
      acc.add(peak);
      for (std::int64_t a = mode + 1; a <= a_hi; ++a) {
        const double t = term(a, m);
        acc.add(t);
        if (t < peak - 45.0) break;
      }
      for (std::int64_t a = mode - 1; a >= a_lo; --a) {
        const double t = term(a, m);
        acc.add(t);
        if (t < peak - 45.0) break;
      }
    }
    const double lpv = acc.value();
    if (lpv == kNegInf) continue;
    values.push_back(static_cast<double>(m) * L.u);
    lps.push_back(lpv);
  }
  // lgamma rounding is about N eps in absolute terms; remove the common offset.
  const double total = log_sum_exp(lps);
  if (std::abs(total) > 1e-6) throw RangeError("sum_distribution_iid_lattice: lost normalization");
  for (double& x : lps) x -= total;
  return FiniteDist::scalar_log(std::move(values), std::move(lps), 1e-10);
}

// Exact law of the sum by iterated pairwise convolution; merged atoms must stay
// within `budget`.
inline FiniteDist sum_distribution_general(const Family& fam, std::size_t budget = kDefaultAtomBudget) {
  FiniteDist acc = fam.member(0);
  const std::size_t d = fam.dim();
  for (std::size_t i = 1; i < fam.size(); ++i) {
    const FiniteDist& m = fam.member(i);
    const double raw = static_cast<double>(acc.size()) * static_cast<double>(m.size());
    if (raw > 8.0 * static_cast<double>(budget)) {
      throw ResourceError("sum_distribution_general: " + std::to_string(static_cast<long long>(raw)) +
                          " raw atoms exceed the atom budget; use the Monte Carlo path");
    }
    std::vector<double> flat;
    std::vector<double> lp;
    flat.reserve(static_cast<std::size_t>(raw) * d);
    lp.reserve(static_cast<std::size_t>(raw));
    for (std::size_t a = 0; a < acc.size(); ++a) {
      const auto pa = acc.point(a);
      for (std::size_t b = 0; b < m.size(); ++b) {
        const auto pb = m.point(b);
        for (std::size_t j = 0; j < d; ++j) flat.push_back(pa[j] + pb[j]);
        lp.push_back(acc.log_prob(a) + m.log_prob(b));
      }
    }
    acc = FiniteDist(d, std::move(flat), std::move(lp), fam.norm_tag(), 1e-10);
    if (acc.size() > budget) {
      throw ResourceError("sum_distribution_general: " + std::to_string(acc.size()) +
                          " atoms exceed the atom budget; use the Monte Carlo path");
    }
  }
  return acc;
}

// Exact law of sum_i eps_i X_i. Each member is replaced by the law of eps X
// (which enumerates both signs) before convolving, so every one of the 2^N sign
// patterns is accounted for.
inline FiniteDist rademacher_sum_distribution(const Family& fam, std::size_t budget = kDefaultAtomBudget) {
  return sum_distribution_general(fam.map([](const FiniteDist& m) { return m.symmetrized(); }), budget);
}

// Exact law of ||X|| as a scalar distribution.
inline FiniteDist norm_distribution(const FiniteDist& d) {
  return FiniteDist::scalar_log(d.norms(), d.log_probs(), 1e-10);
}

// n x N matrix of atom indices. Row r uses the stream mix_seed(seed, 0, r), and
// member j within the row consumes the j-th draw of that stream.
struct SampleMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> index;

  std::uint32_t at(std::size_t r, std::size_t c) const { return index[r * cols + c]; }
};

namespace detail {

inline std::vector<double> cumulative(const FiniteDist& d) {
  std::vector<double> c(d.size());
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    s += d.prob(i);
    c[i] = s;
  }
  c.back() = std::max(c.back(), 1.0);
  return c;
}

inline std::uint32_t draw(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
  const auto idx = static_cast<std::size_t>(std::distance(cdf.begin(), it));
  return static_cast<std::uint32_t>(std::min(idx, cdf.size() - 1));
}

}  // namespace detail

inline SampleMatrix sample(const Family& fam, std::size_t n, std::uint64_t seed, unsigned threads = 1,
                           std::uint64_t stream = 0) {
  if (n == 0) throw InvalidParameter("sample: n must be >= 1");
  SampleMatrix s;
  s.rows = n;
  s.cols = fam.size();
  s.index.resize(n * s.cols);
  const std::size_t distinct = fam.is_iid() ? 1 : fam.size();
  std::vector<std::vector<double>> cdfs(distinct);
  for (std::size_t j = 0; j < distinct; ++j) cdfs[j] = detail::cumulative(fam.member(j));
  parallel_rows(n, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      RowRng rng(seed, stream, r);
      for (std::size_t j = 0; j < s.cols; ++j) {
        s.index[r * s.cols + j] = detail::draw(cdfs[fam.is_iid() ? 0 : j], rng.uniform());
      }
    }
  });
  return s;
}

}  // namespace hjorlicz
