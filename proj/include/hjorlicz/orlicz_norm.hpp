#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dist_ops.hpp"
#include "errors.hpp"
#include "finite_dist.hpp"
#include "numeric.hpp"
#include "orlicz_function.hpp"
#include "rng.hpp"

namespace hjorlicz {

enum class Method { exact, monte_carlo };

inline const char* method_name(Method m) { return m == Method::exact ? "exact" : "monte-carlo"; }

struct NormEstimate {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  Method method = Method::exact;
  std::size_t samples = 0;
};

inline constexpr int kSections = 16;

namespace detail {

// ln E Psi(r / a) over weighted atoms (ln weights), evaluated in the log domain
// throughout so that tower-sized Psi values never leave it.
inline double log_mean_psi(const OrliczFunction& psi, std::span<const double> r, std::span<const double> lw, double a) {
  LogSumAccumulator acc;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] > 0.0) acc.add(lw[i] + psi.log_value(r[i] / a));
  }
  return acc.value();
}

// Root of ln E Psi(r/a) = 0 by doubling from a = 1 then bisection.
inline Bracket luxemburg_bracket(const OrliczFunction& psi, std::span<const double> r, std::span<const double> lw,
                                 double rel_tol) {
  BisectionOptions opt;
  opt.rel_tol = rel_tol;
  return threshold_search([&](double a) { return log_mean_psi(psi, r, lw, a) <= 0.0; }, 1.0, opt);
}

}  // namespace detail

// ||X||_Psi = inf{a > 0 : E Psi(||X||/a) <= 1}
inline NormEstimate norm_exact(const FiniteDist& d, const OrliczFunction& psi, double rel_tol = 1e-10) {
  const auto r = d.norms();
  if (std::all_of(r.begin(), r.end(), [](double x) { return x == 0.0; })) return {0.0, 0.0, 0.0, Method::exact, 0};
  const Bracket b = detail::luxemburg_bracket(psi, r, d.log_probs(), rel_tol);
  return {0.5 * (b.lo + b.hi), b.lo, b.hi, Method::exact, 0};
}

// E ||X||
inline double l1_exact(const FiniteDist& d) {
  LogSumAccumulator acc;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = d.norm_of(i);
    if (r > 0.0) acc.add(d.log_prob(i) + std::log(r));
  }
  return std::exp(acc.value());
}

// Empirical Luxemburg norm of equally weighted samples.
inline double empirical_norm(const OrliczFunction& psi, std::span<const double> ys) {
  std::vector<double> pos;
  pos.reserve(ys.size());
  for (double y : ys) {
    if (!(y >= 0.0) || !std::isfinite(y)) throw DomainError("empirical_norm: samples must be finite and >= 0");
    if (y > 0.0) pos.push_back(y);
  }
  if (pos.empty()) return 0.0;
  const std::vector<double> lw(pos.size(), -std::log(static_cast<double>(ys.size())));
  Bracket b;
  try {
    b = detail::luxemburg_bracket(psi, pos, lw, 1e-10);
  } catch (const RangeError&) {
    throw RangeError("norm_mc: empirical map stays above 1 up to the bracket cap");
  }
  return 0.5 * (b.lo + b.hi);
}

// Point estimate is the empirical norm of the whole sample; the interval is a
// Student t interval (15 degrees of freedom) from 16 contiguous sections.
inline NormEstimate norm_from_samples(const OrliczFunction& psi, std::span<const double> ys) {
  const std::size_t n = ys.size();
  if (n < kSections) throw InvalidParameter("norm_from_samples: need at least 16 samples");
  NormEstimate est;
  est.method = Method::monte_carlo;
  est.samples = n;
  est.value = empirical_norm(psi, ys);
  double mean = 0.0, m2 = 0.0;
  for (int s = 0; s < kSections; ++s) {
    const std::size_t b = n * static_cast<std::size_t>(s) / kSections;
    const std::size_t e = n * static_cast<std::size_t>(s + 1) / kSections;
    const double v = empirical_norm(psi, ys.subspan(b, e - b));
    const double delta = v - mean;
    mean += delta / (s + 1);
    m2 += delta * (v - mean);
  }
  const double sd = std::sqrt(m2 / (kSections - 1));
  const double half = kT975Df15 * sd / std::sqrt(static_cast<double>(kSections));
  est.lo = std::max(0.0, est.value - half);
  est.hi = est.value + half;
  return est;
}

enum class Functional { sum_norm, max_norm };

inline const char* functional_name(Functional f) { return f == Functional::sum_norm ? "sum-norm" : "max-norm"; }

// Per-row values of the functional over a sample of the family.
inline std::vector<double> functional_samples(const Family& fam, Functional fn, std::size_t n, std::uint64_t seed,
                                              unsigned threads = 1, std::uint64_t stream = 0) {
  const SampleMatrix s = sample(fam, n, seed, threads, stream);
  std::vector<double> ys(n);
  const std::size_t d = fam.dim();
  parallel_rows(n, threads, [&](std::size_t b, std::size_t e) {
    std::vector<double> acc(d);
    for (std::size_t r = b; r < e; ++r) {
      if (fn == Functional::sum_norm) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t j = 0; j < s.cols; ++j) {
          const auto p = fam.member(j).point(s.at(r, j));
          for (std::size_t k = 0; k < d; ++k) acc[k] += p[k];
        }
        ys[r] = apply_norm(fam.norm_tag(), acc);
      } else {
        double m = 0.0;
        for (std::size_t j = 0; j < s.cols; ++j) m = std::max(m, fam.member(j).norm_of(s.at(r, j)));
        ys[r] = m;
      }
    }
  });
  return ys;
}

inline NormEstimate norm_mc(const Family& fam, Functional fn, const OrliczFunction& psi, std::size_t n,
                            std::uint64_t seed, unsigned threads = 1) {
  if (n < 1000) throw InvalidParameter("norm_mc: n must be >= 1000");
  const auto ys = functional_samples(fam, fn, n, seed, threads);
  return norm_from_samples(psi, ys);
}

// Best tangent minorant Psi(x) >= a x - b over a grid, minimizing (1 + b)/a.
struct AffineMinorant {
  double a = 0.0;
  double b = 0.0;
  double constant = kInf;  // (1 + b) / a
  double at = 0.0;
};

inline AffineMinorant affine_minorant(const OrliczFunction& psi, std::span<const double> grid) {
  AffineMinorant best;
  for (double x : grid) {
    if (!(x > 0)) continue;
    const double ld = psi.log_derivative(x);
    const double lv = psi.log_value(x);
    if (!std::isfinite(ld) || ld > 700.0 || lv > 700.0) continue;
    const double a = std::exp(ld);
    const double b = std::max(0.0, a * x - std::exp(lv));
    const double c = (1.0 + b) / a;
    if (c < best.constant) best = {a, b, c, x};
  }
  if (!std::isfinite(best.constant)) throw DomainError("affine_minorant: no usable grid point");
  return best;
}

inline AffineMinorant affine_minorant(const OrliczFunction& psi) {
  const auto g = default_validation_grid(psi);
  return affine_minorant(psi, g);
}

}  // namespace hjorlicz
