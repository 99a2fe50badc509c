#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "errors.hpp"

namespace hjorlicz {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b))
inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

// log(exp(a) - exp(b)) for a >= b; -inf when equal.
inline double log_sub_exp(double a, double b) {
  if (b > a) throw DomainError("log_sub_exp: second argument exceeds the first");
  if (b == kNegInf) return a;
  if (a == b) return kNegInf;
  const double d = b - a;
  // log(1 - e^d) with the usual branch at -ln 2
  return a + (d > -std::numbers::ln2 ? std::log(-std::expm1(d)) : std::log1p(-std::exp(d)));
}

// log(1 - exp(x)) for x <= 0
inline double log1m_exp(double x) {
  if (x > 0) throw DomainError("log1m_exp: positive argument");
  if (x == 0) return kNegInf;
  return x > -std::numbers::ln2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

// log(1 + exp(x)), overflow-free
inline double softplus(double x) {
  if (x == kNegInf) return 0.0;
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// log(exp(x) - 1) for x >= 0
inline double log_expm1(double x) {
  if (x < 0) throw DomainError("log_expm1: negative argument");
  if (x == 0) return kNegInf;
  if (x > 30.0) return x + std::log1p(-std::exp(-x));
  return std::log(std::expm1(x));
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf || m == kInf) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// Streaming log-sum-exp accumulator; rescales when a larger term arrives.
class LogSumAccumulator {
 public:
  void add(double x) {
    if (x == kNegInf) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  double value() const { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

inline double log_binomial(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

struct BisectionOptions {
  double rel_tol = 1e-10;
  int max_iter = 200;
  // Exponential bracket search: number of doublings/halvings before giving up.
  int max_bracket_steps = 2100;
};

struct Bracket {
  double lo;
  double hi;
  int iterations;
};

// Locates the threshold of a monotone predicate on (0, inf): `pred` is false
// below some x0 and true above it. The bracket starts at `start` and is grown by
// doubling (or shrunk by halving), then bisected until hi/lo - 1 <= rel_tol or
// the bracket stops shrinking in floating point. pred(hi) is always true.
template <class Pred>
Bracket threshold_search(Pred&& pred, double start, const BisectionOptions& opt = {}) {
  if (!(start > 0)) throw DomainError("threshold_search: start must be positive");
  double lo = start;
  double hi = start;
  if (pred(start)) {
    int steps = 0;
    while (true) {
      const double next = hi * 0.5;
      if (next == 0.0 || steps++ > opt.max_bracket_steps) return {0.0, hi, steps};
      if (!pred(next)) {
        lo = next;
        break;
      }
      hi = next;
    }
  } else {
    int steps = 0;
    while (!pred(hi)) {
      lo = hi;
      hi *= 2.0;
      if (!std::isfinite(hi) || steps++ > opt.max_bracket_steps) {
        throw RangeError("threshold_search: bracket exhausted the representable range");
      }
    }
  }
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    if (hi - lo <= opt.rel_tol * hi) break;
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {lo, hi, it};
}

// Same as threshold_search but keeps bisecting to floating-point resolution
// (used where the caller needs eval(result) to match a target, not just x).
template <class Pred>
Bracket threshold_search_tight(Pred&& pred, double start, int max_iter = 200) {
  BisectionOptions opt;
  opt.rel_tol = 0.0;
  opt.max_iter = max_iter;
  return threshold_search(std::forward<Pred>(pred), start, opt);
}

// Log-spaced grid of n points on [lo, hi], both inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0) || !(hi >= lo) || n == 0) throw DomainError("log_grid: need 0 < lo <= hi, n > 0");
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

// Student t 0.975 quantile with 15 degrees of freedom (16 sections).
inline constexpr double kT975Df15 = 2.131449545559323;

}  // namespace hjorlicz
