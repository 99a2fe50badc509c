#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
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

struct McOptions {
  std::size_t samples = 100'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::uint64_t stream = 0;
};

// ||S||_Psi / (||S||_1 + ||max_i ||X_i|| ||_Psi); ratio is empty for 0/0.
struct RatioRecord {
  std::string family;
  std::size_t n = 0;
  double u = 0.0;
  NormEstimate sum_norm;
  double l1 = 0.0;
  NormEstimate max_norm;
  std::optional<double> ratio;
  std::optional<double> a_low;        // three-point single-atom bound
  std::optional<double> ratio_lower;  // max(a_low, sum_norm.lo) / (l1 + max_norm.hi)
  Method method = Method::exact;
};

struct RatioReport {
  std::vector<RatioRecord> records;
  std::optional<double> empirical_d;
  std::string mode;
};

enum class LabMode { exact, monte_carlo };

// N u / Psi^{-1}((2 N Psi(u))^N), computed through ln Psi.
inline double three_point_lower_bound(const OrliczFunction& psi, double u, std::size_t n) {
  const double N = static_cast<double>(n);
  const double target = N * (std::log(2.0 * N) + psi.log_value(u));
  return N * u / psi.invert(target, InverseScale::log);
}

// N in [n_min, n_max] maximizing the single-atom bound at u (ties: smallest N).
inline std::size_t best_three_point_size(const OrliczFunction& psi, double u, std::size_t n_max) {
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    if (!(std::log(static_cast<double>(n)) + psi.log_value(u) > 0)) continue;
    const double v = three_point_lower_bound(psi, u, n);
    if (v > best_v) {
      best_v = v;
      best = n;
    }
  }
  if (best == 0) throw InvalidParameter("best_three_point_size: N Psi(u) <= 1 for every N in range");
  return best;
}

namespace detail {

inline bool is_lattice_iid(const Family& fam) {
  if (!fam.is_iid() || !fam.member(0).is_scalar()) return false;
  try {
    (void)as_lattice(fam.member(0));
    return true;
  } catch (const InvalidParameter&) {
    return false;
  }
}

inline void finish_ratio(RatioRecord& r) {
  const double den = r.l1 + r.max_norm.value;
  if (den > 0.0) {
    r.ratio = r.sum_norm.value / den;
  } else if (r.sum_norm.value > 0.0) {
    r.ratio = kInf;
  }
  const double den_hi = r.l1 + r.max_norm.hi;
  if (den_hi > 0.0) {
    const double num = std::max(r.sum_norm.lo, r.a_low.value_or(0.0));
    r.ratio_lower = num / den_hi;
  }
}

}  // namespace detail

inline RatioRecord hj_ratio(const Family& fam, const OrliczFunction& psi, LabMode mode, const McOptions& mc = {},
                            std::size_t budget = kDefaultAtomBudget) {
  RatioRecord r;
  r.n = fam.size();
  if (mode == LabMode::exact) {
    FiniteDist sum;
    try {
      sum = detail::is_lattice_iid(fam) ? sum_distribution_iid_lattice(fam.member(0), fam.size())
                                        : sum_distribution_general(fam, budget);
    } catch (const ResourceError& e) {
      throw ResourceError(std::string(e.what()) + " (rerun hj_ratio in monte-carlo mode)");
    }
    r.sum_norm = norm_exact(sum, psi);
    r.l1 = l1_exact(sum);
    r.max_norm = norm_exact(max_distribution(fam, budget), psi);
    r.method = Method::exact;
  } else {
    const auto ys = functional_samples(fam, Functional::sum_norm, mc.samples, mc.seed, mc.threads, mc.stream);
    r.sum_norm = norm_from_samples(psi, ys);
    double s = 0.0;
    for (double y : ys) s += y;
    r.l1 = s / static_cast<double>(ys.size());
    const auto ms = functional_samples(fam, Functional::max_norm, mc.samples, mc.seed, mc.threads, mc.stream);
    r.max_norm = norm_from_samples(psi, ms);
    r.method = Method::monte_carlo;
  }
  detail::finish_ratio(r);
  return r;
}

inline RatioRecord hj_ratio_three_point(const OrliczFunction& psi, double u, std::size_t n, LabMode mode,
                                        const McOptions& mc = {}) {
  RatioRecord r = hj_ratio(Family::iid(make_three_point(psi, u, n), n), psi, mode, mc);
  r.u = u;
  r.family = "three_point";
  r.a_low = three_point_lower_bound(psi, u, n);
  detail::finish_ratio(r);
  return r;
}

// Quantile form for L_p: ||max_n |S_n| ||_p / (t0 + ||max_i |X_i| ||_p), with
// t0 = inf{t > 0 : P(max_n |S_n| > t) <= (2 4^p)^{-1}}.
struct QuantileRatioRecord {
  std::size_t n = 0;
  double p = 0.0;
  double level = 0.0;
  double t0 = 0.0;
  double path_max_norm = 0.0;  // || max_n |S_n| ||_p
  double max_norm = 0.0;       // || max_i |X_i| ||_p
  double ratio = 0.0;
};

// Exact law of max_{n <= N} |X_1 + ... + X_n| for iid X on {-u, 0, u}, by a
// walk over (partial sum, running max) in units of u.
inline FiniteDist path_max_distribution(const FiniteDist& d, std::size_t n) {
  const detail::LatticeLaw L = detail::as_lattice(d);
  const std::size_t w = 2 * n + 1;
  auto at = [&](std::size_t k, std::size_t m) { return m * w + k; };  // k = sum + n
  std::vector<double> cur((n + 1) * w, kNegInf), next;
  cur[at(n, 0)] = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    next.assign(cur.size(), kNegInf);
    for (std::size_t m = 0; m <= step; ++m) {
      for (std::size_t k = n - m; k <= n + m; ++k) {
        const double lp = cur[at(k, m)];
        if (lp == kNegInf) continue;
        for (int dk : {-1, 0, 1}) {
          const double le = dk < 0 ? L.lm : (dk == 0 ? L.l0 : L.lp);
          if (le == kNegInf) continue;
          const std::size_t k2 = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(k) + dk);
          const std::size_t a = k2 > n ? k2 - n : n - k2;
          const std::size_t m2 = std::max(m, a);
          next[at(k2, m2)] = log_add_exp(next[at(k2, m2)], lp + le);
        }
      }
    }
    cur.swap(next);
  }
  std::vector<double> vals, lps;
  for (std::size_t m = 0; m <= n; ++m) {
    double lm = kNegInf;
    for (std::size_t k = 0; k < w; ++k) lm = log_add_exp(lm, cur[at(k, m)]);
    if (lm == kNegInf) continue;
    vals.push_back(static_cast<double>(m) * L.u);
    lps.push_back(lm);
  }
  return FiniteDist::scalar_log(vals, lps);
}

inline QuantileRatioRecord hj_quantile_ratio(const FiniteDist& d, std::size_t n, const OrliczFunction& psi) {
  if (psi.family() != PsiFamily::power_law) throw InvalidParameter("hj_quantile_ratio: PowerLaw Psi required");
  if (n == 0) throw InvalidParameter("hj_quantile_ratio: n must be >= 1");
  QuantileRatioRecord r;
  r.n = n;
  r.p = psi.parameter();
  r.level = 1.0 / (2.0 * std::pow(4.0, r.p));
  const FiniteDist pm = path_max_distribution(d, n);
  // atoms ascend; t0 is the first atom whose upper tail is within the level
  double tail = 1.0;
  r.t0 = pm.value(pm.size() - 1);
  for (std::size_t i = 0; i < pm.size(); ++i) {
    tail -= pm.prob(i);
    if (tail <= r.level * (1 + 1e-12)) {
      r.t0 = pm.value(i);
      break;
    }
  }
  r.path_max_norm = norm_exact(pm, psi).value;
  r.max_norm = norm_exact(max_distribution(Family::iid(d, n)), psi).value;
  const double den = r.t0 + r.max_norm;
  r.ratio = den > 0 ? r.path_max_norm / den : 0.0;
  return r;
}

// Three-point cells over u-grid x N-grid. Cells are independent; the MC stream
// of a cell is its row-major index, so results do not depend on `threads`.
inline RatioReport ratio_sweep(const OrliczFunction& psi, const std::vector<double>& u_grid,
                               const std::vector<std::size_t>& n_grid, LabMode mode, const McOptions& mc = {}) {
  if (u_grid.empty() || n_grid.empty()) throw InvalidParameter("ratio_sweep: grids must be nonempty");
  RatioReport rep;
  rep.mode = mode == LabMode::exact ? "exact" : "monte-carlo";
  const std::size_t cells = u_grid.size() * n_grid.size();
  rep.records.resize(cells);
  McOptions cell_mc = mc;
  cell_mc.threads = 1;
  parallel_rows(cells, mc.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t c = b; c < e; ++c) {
      McOptions o = cell_mc;
      o.stream = c;
      rep.records[c] = hj_ratio_three_point(psi, u_grid[c / n_grid.size()], n_grid[c % n_grid.size()], mode, o);
    }
  });
  for (const auto& r : rep.records) {
    if (r.ratio) rep.empirical_d = std::max(rep.empirical_d.value_or(0.0), *r.ratio);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Lemma suite

struct LemmaViolation {
  std::size_t case_index;
  std::string lemma;
  std::string detail;
  double lhs;
  double rhs;
};

struct LemmaSuiteReport {
  std::size_t cases = 0;
  std::size_t checks_tail_sum = 0, checks_orlicz_tail = 0, checks_symmetrization = 0;
  std::size_t checks_l1_embedding = 0, checks_norm_of_mean = 0;
  std::vector<LemmaViolation> violations;
  std::uint64_t seed = 0;

  std::size_t checks() const {
    return checks_tail_sum + checks_orlicz_tail + checks_symmetrization + checks_l1_embedding + checks_norm_of_mean;
  }
};

inline constexpr double kLemmaSlack = 1e-9;

inline std::vector<OrliczFunction> lemma_suite_functions() {
  return {OrliczFunction::power_law(1.0),     OrliczFunction::power_law(2.0),  OrliczFunction::power_law(3.5),
          OrliczFunction::exp_power(1.0),     OrliczFunction::exp_power(0.5),  OrliczFunction::heavy_tail_log(1.5),
          OrliczFunction::heavy_tail_log(3.0), OrliczFunction::exp_square()};
}

// Random family for case `index`: N <= 5 members, <= 4 atoms each, values on a
// 1/4 grid in [-3, 3] (so ties and cancellations occur), d in {1, 2, 3}.
inline Family lemma_case_family(std::uint64_t seed, std::size_t index) {
  RowRng rng(seed, 0x4c454d4dULL, index);
  const std::size_t n = 1 + rng.next_u64() % 5;
  const std::size_t dim = rng.uniform() < 0.5 ? 1 : 2 + rng.next_u64() % 2;
  const NormTag tags[] = {NormTag::sup, NormTag::euclidean, NormTag::l1};
  const NormTag tag = dim == 1 ? NormTag::abs : tags[rng.next_u64() % 3];
  std::vector<FiniteDist> members;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t atoms = 1 + rng.next_u64() % 4;
    std::vector<double> flat;
    std::vector<double> w;
    double total = 0.0;
    for (std::size_t a = 0; a < atoms; ++a) {
      for (std::size_t k = 0; k < dim; ++k) flat.push_back(std::round((rng.uniform() * 6.0 - 3.0) * 4.0) / 4.0);
      const double wi = 0.05 + rng.uniform();
      w.push_back(wi);
      total += wi;
    }
    for (double& x : w) x /= total;
    members.push_back(FiniteDist::vector(dim, std::move(flat), std::move(w), tag, 1e-9));
  }
  return Family::independent(std::move(members));
}

inline LemmaSuiteReport lemma_suite(std::uint64_t seed, std::size_t cases, unsigned threads = 1) {
  if (cases == 0) throw InvalidParameter("lemma_suite: cases must be >= 1");
  const auto psis = lemma_suite_functions();
  std::vector<LemmaSuiteReport> partial(cases);
  parallel_rows(cases, threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t c = b; c < e; ++c) {
      LemmaSuiteReport& rep = partial[c];
      const OrliczFunction& psi = psis[c % psis.size()];
      const Family fam = lemma_case_family(seed, c);
      auto check = [&](const char* lemma, const std::string& what, double lhs, double rhs) {
        if (lhs > rhs + kLemmaSlack * std::max(1.0, std::abs(rhs))) rep.violations.push_back({c, lemma, what, lhs, rhs});
      };

      // Tail sums against the maximum
      const FiniteDist mx = max_distribution(fam);
      for (std::size_t a = 0; a < mx.size(); ++a) {
        const double t = mx.value(a);
        if (!(t > 0)) continue;
        const double pmax = mx.tail(t - kAtomMergeTol);
        if (pmax > 0.5) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < fam.size(); ++j) s += fam.member(j).tail(t - kAtomMergeTol);
        ++rep.checks_tail_sum;
        check("tail-sum", "t=" + std::to_string(t), s, 2.0 * pmax);
      }

      // Orlicz-Chebyshev tail bound for Y = ||S|| and Y = max
      const FiniteDist sum = sum_distribution_general(fam);
      for (const FiniteDist* y : {&sum, &mx}) {
        const FiniteDist law = norm_distribution(*y);
        const double ny = norm_exact(law, psi).value;
        if (!(ny > 0)) continue;
        for (std::size_t a = 0; a < law.size(); ++a) {
          const double t = law.value(a);
          if (!(t > 0)) continue;
          ++rep.checks_orlicz_tail;
          check("orlicz-tail", "t=" + std::to_string(t), law.tail(t - kAtomMergeTol), 2.0 * std::exp(-psi.psi(t / ny)));
        }
      }

      // Symmetrization for centered members
      const Family cfam = fam.map([](const FiniteDist& d) { return d.centered(); });
      const double a_sym = norm_exact(rademacher_sum_distribution(cfam), psi).value;
      const double b_plain = norm_exact(sum_distribution_general(cfam), psi).value;
      rep.checks_symmetrization += 2;
      check("symmetrization", "lower", 0.5 * a_sym, b_plain);
      check("symmetrization", "upper", b_plain, 2.0 * a_sym);

      // First moment against the Orlicz norm, and the norm of the mean
      const AffineMinorant am = affine_minorant(psi);
      const double c_mean = std::max(psi.value(1.0), 1.0);
      for (const FiniteDist* x : {&sum, &fam.member(0)}) {
        const double l1 = l1_exact(*x);
        const double nx = norm_exact(*x, psi).value;
        ++rep.checks_l1_embedding;
        check("l1-embedding", "C=" + std::to_string(am.constant), l1, am.constant * nx);
        const auto m = x->mean();
        const FiniteDist pm = FiniteDist::point_mass(m, x->norm_tag());
        const double norm_mean = apply_norm(x->norm_tag(), m);
        const double lhs = norm_exact(pm, psi).value;
        rep.checks_norm_of_mean += 2;
        check("norm-of-mean", "mean", lhs, c_mean * norm_mean);
        check("norm-of-mean", "l1", c_mean * norm_mean, c_mean * l1);
      }
    }
  });
  LemmaSuiteReport out;
  out.seed = seed;
  out.cases = cases;
  for (auto& p : partial) {
    out.checks_tail_sum += p.checks_tail_sum;
    out.checks_orlicz_tail += p.checks_orlicz_tail;
    out.checks_symmetrization += p.checks_symmetrization;
    out.checks_l1_embedding += p.checks_l1_embedding;
    out.checks_norm_of_mean += p.checks_norm_of_mean;
    out.violations.insert(out.violations.end(), p.violations.begin(), p.violations.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random series with blocks Z_{i,k} = Y_{i,k} / k^2

struct SeriesBlock {
  double u;
  std::size_t n;
};

struct SeriesSpec {
  std::vector<SeriesBlock> blocks;

  // m_k = N_1 + ... + N_{k-1}
  std::vector<std::size_t> offsets() const {
    std::vector<std::size_t> m{0};
    for (const auto& b : blocks) m.push_back(m.back() + b.n);
    return m;
  }
};

struct SeriesRecord {
  int k = 0;
  double u = 0.0;
  std::size_t n = 0;
  std::size_t m_next = 0;            // m_{k+1}
  double a_low = 0.0;                // single-atom bound on ||sum_i Y_{i,k}||
  NormEstimate block_norm;           // exact ||sum_i Y_{i,k}||
  double lower_bound = 0.0;          // max(a_low, block_norm.lo) / k^2 <= ||S_{m_{k+1}}||
  std::optional<NormEstimate> partial_sum_norm;  // exact ||S_{m_{k+1}}|| when the convolution fits
  double block_max_norm = 0.0;       // ||max_i |Y_{i,k}| ||, upper end of the bracket
  double upper_bound = 0.0;          // sum_{j<=k} block_max_norm_j / j^2
};

struct SeriesReport {
  std::vector<SeriesRecord> records;
  double sup_upper_bound = 0.0;
  double tail_mass = 0.0;  // sum_k 1/Psi(u_k)
  bool lower_reaches_k = true;
  bool upper_below_zeta2 = true;
  bool truncated = false;
  std::string notice;
};

// For k = 1..k_max, picks the first breakpoint after the previous one whose best
// three-point bound (N <= n^3) reaches k^3.
inline SeriesSpec series_schedule(const OrliczFunction& psi, const std::vector<double>& breakpoints, int k_max,
                                  std::string* notice = nullptr) {
  SeriesSpec spec;
  std::size_t idx = 1;  // breakpoints[0] = 0
  for (int k = 1; k <= k_max; ++k) {
    bool found = false;
    for (; idx < breakpoints.size(); ++idx) {
      const double u = breakpoints[idx];
      const auto cap = static_cast<std::size_t>(std::pow(static_cast<double>(idx + 1), 3));
      std::size_t n;
      double a;
      try {
        n = best_three_point_size(psi, u, cap);
        a = three_point_lower_bound(psi, u, n);
      } catch (const InvalidParameter&) {
        continue;
      } catch (const RangeError&) {
        idx = breakpoints.size();
        break;
      }
      if (a >= static_cast<double>(k) * k * k) {
        spec.blocks.push_back({u, n});
        ++idx;
        found = true;
        break;
      }
    }
    if (!found) {
      if (notice) *notice = "schedule truncated at k=" + std::to_string(k) + ": no usable breakpoint reaches k^3";
      break;
    }
  }
  return spec;
}

inline SeriesReport series_experiment(const OrliczFunction& psi, const SeriesSpec& spec,
                                      std::size_t budget = kDefaultAtomBudget) {
  SeriesReport rep;
  const auto m = spec.offsets();
  std::vector<FiniteDist> scaled_blocks;
  double upper = 0.0;
  double joint = 1.0;
  bool exact_partial = true;
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    const auto [u, n] = spec.blocks[i];
    const double k2 = static_cast<double>(k) * k;
    SeriesRecord rec;
    rec.k = k;
    rec.u = u;
    rec.n = n;
    rec.m_next = m[i + 1];
    try {
      const FiniteDist y = make_three_point(psi, u, n);
      rec.a_low = three_point_lower_bound(psi, u, n);
      const FiniteDist block = sum_distribution_iid_lattice(y, n);
      rec.block_norm = norm_exact(block, psi);
      rec.lower_bound = std::max(rec.a_low, rec.block_norm.lo) / k2;
      rec.block_max_norm = norm_exact(max_distribution(Family::iid(y, n)), psi).hi;
      upper += rec.block_max_norm / k2;
      rec.upper_bound = upper;
      rep.tail_mass += std::exp(-psi.log_value(u));
      joint *= static_cast<double>(block.size());
      if (exact_partial && joint <= static_cast<double>(budget)) {
        scaled_blocks.push_back(block.scaled(1.0 / k2));
        const FiniteDist partial = sum_distribution_general(Family::independent(scaled_blocks), budget);
        rec.partial_sum_norm = norm_exact(partial, psi);
      } else {
        exact_partial = false;
      }
    } catch (const RangeError& e) {
      rep.truncated = true;
      rep.notice = "truncated at k=" + std::to_string(k) + ": " + e.what();
      break;
    }
    rep.lower_reaches_k = rep.lower_reaches_k && rec.lower_bound >= static_cast<double>(k);
    rep.records.push_back(rec);
  }
  rep.sup_upper_bound = upper;
  rep.upper_below_zeta2 = upper < std::numbers::pi * std::numbers::pi / 6.0;
  return rep;
}

}  // namespace hjorlicz
