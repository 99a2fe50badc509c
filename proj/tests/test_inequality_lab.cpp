#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include <hjorlicz/counterexample.hpp>
#include <hjorlicz/inequality_lab.hpp>

#include "support.hpp"

using namespace hjorlicz;

TEST(HJRatio, SingleMemberIsBelowOne) {
  hjtest::Gen g(41);
  const auto f = OrliczFunction::exp_power(1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = g.scalar_law(g.integer(1, 5));
    if (l1_exact(d) == 0.0) continue;
    const auto r = hj_ratio(Family::iid(d, 1), f, LabMode::exact);
    const double nx = norm_exact(d, f).value;
    ASSERT_TRUE(r.ratio);
    EXPECT_NEAR(*r.ratio, nx / (l1_exact(d) + nx), 1e-9);
    EXPECT_LT(*r.ratio, 1.0);
  }
}

TEST(HJRatio, ZeroFamilyHasNoRatio) {
  const auto r = hj_ratio(Family::iid(FiniteDist::point_mass(0.0), 4), OrliczFunction::exp_power(1.0), LabMode::exact);
  EXPECT_FALSE(r.ratio);
  EXPECT_EQ(r.sum_norm.value, 0.0);
}

TEST(HJRatio, MatchesEnumerationOracle) {
  hjtest::Gen g(42);
  const auto f = OrliczFunction::heavy_tail_log(2.0);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<FiniteDist> ms;
    for (int i = 0; i < 3; ++i) ms.push_back(g.scalar_law(g.integer(2, 3)));
    // joint enumeration of (sum, max)
    std::vector<double> sv, mv, lp;
    for (std::size_t a = 0; a < ms[0].size(); ++a)
      for (std::size_t b = 0; b < ms[1].size(); ++b)
        for (std::size_t c = 0; c < ms[2].size(); ++c) {
          const double x = ms[0].value(a), y = ms[1].value(b), z = ms[2].value(c);
          sv.push_back(x + y + z);
          mv.push_back(std::max({std::abs(x), std::abs(y), std::abs(z)}));
          lp.push_back(ms[0].log_prob(a) + ms[1].log_prob(b) + ms[2].log_prob(c));
        }
    const auto sd = FiniteDist::scalar_log(sv, lp, 1e-9);
    const auto md = FiniteDist::scalar_log(mv, lp, 1e-9);
    if (l1_exact(sd) == 0.0) continue;
    const double want = norm_exact(sd, f).value / (l1_exact(sd) + norm_exact(md, f).value);
    const auto r = hj_ratio(Family::independent(ms), f, LabMode::exact);
    ASSERT_TRUE(r.ratio);
    EXPECT_NEAR(*r.ratio, want, 1e-8 * want);
  }
}

TEST(HJRatio, ScaleInvariant) {
  hjtest::Gen g(43);
  const auto f = OrliczFunction::exp_power(0.5);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<FiniteDist> ms;
    for (int i = 0; i < 3; ++i) ms.push_back(g.scalar_law(3));
    const auto fam = Family::independent(ms);
    const double c = g.log_uniform(0.1, 10.0);
    const auto a = hj_ratio(fam, f, LabMode::exact);
    const auto b = hj_ratio(fam.map([c](const FiniteDist& d) { return d.scaled(c); }), f, LabMode::exact);
    if (!a.ratio) continue;
    EXPECT_NEAR(*a.ratio, *b.ratio, 1e-8);
  }
}

TEST(HJRatio, ExactModeRaisesResourceError) {
  const auto d = FiniteDist::scalar({0.0, 1.0, std::numbers::pi, std::numbers::e}, {0.1, 0.2, 0.3, 0.4});
  EXPECT_THROW(hj_ratio(Family::iid(d, 30), OrliczFunction::exp_power(1.0), LabMode::exact, {}, 1000), ResourceError);
}

TEST(HJRatio, MonteCarloAgreesWithExact) {
  const auto f = OrliczFunction::exp_power(1.0);
  McOptions mc;
  mc.samples = 50000;
  mc.seed = 4242;
  const auto e = hj_ratio_three_point(f, 1.5, 8, LabMode::exact);
  const auto m = hj_ratio_three_point(f, 1.5, 8, LabMode::monte_carlo, mc);
  EXPECT_EQ(m.method, Method::monte_carlo);
  EXPECT_NEAR(*m.ratio, *e.ratio, 0.05 * *e.ratio);
  EXPECT_NEAR(m.l1, e.l1, 0.05 * e.l1);
  mc.threads = 3;
  const auto m3 = hj_ratio_three_point(f, 1.5, 8, LabMode::monte_carlo, mc);
  EXPECT_EQ(*m3.ratio, *m.ratio);
}

TEST(ThreePoint, MeanAbsoluteSumIsSmall) {
  // E|S| <= N E|X| = u / Psi(u)
  hjtest::Gen g(44);
  for (const auto& f : {OrliczFunction::exp_power(1.0), OrliczFunction::power_law(2.0), OrliczFunction::exp_square()}) {
    for (int rep = 0; rep < 10; ++rep) {
      const double u = g.uniform(1.5, 4.0);
      const auto n = static_cast<std::size_t>(g.integer(1, 200));
      const auto r = hj_ratio_three_point(f, u, n, LabMode::exact);
      EXPECT_LE(r.l1, u / f.value(u) * (1 + 1e-9)) << f.describe();
    }
  }
}

TEST(ThreePoint, SingleAtomBoundIsCertified) {
  hjtest::Gen g(45);
  for (const auto& f : {OrliczFunction::exp_power(1.0), OrliczFunction::exp_square(), OrliczFunction::heavy_tail_log(3.0)}) {
    for (int rep = 0; rep < 10; ++rep) {
      const double u = g.uniform(1.5, 3.0);
      const auto n = static_cast<std::size_t>(g.integer(1, 40));
      const double a = three_point_lower_bound(f, u, n);
      // P(S = N u) Psi(N u / a) = 1 with P(S = N u) = (2 N Psi(u))^{-N}
      const double N = static_cast<double>(n);
      const double lp = -N * (std::log(2 * N) + f.log_value(u));
      EXPECT_NEAR(lp + f.log_value(N * u / a), 0.0, 1e-8 * (1 + std::abs(lp)));
      const auto r = hj_ratio_three_point(f, u, n, LabMode::exact);
      EXPECT_LE(a, r.sum_norm.hi * (1 + 1e-9));
      ASSERT_TRUE(r.ratio_lower);
      EXPECT_LE(*r.ratio_lower, *r.ratio * (1 + 1e-9));
    }
  }
}

TEST(ThreePoint, BestSizeIsArgmax) {
  const auto f = OrliczFunction::exp_power(1.0);
  for (double u : {2.0, 10.0, 50.0}) {
    const std::size_t best = best_three_point_size(f, u, 60);
    double top = 0.0;
    std::size_t arg = 0;
    for (std::size_t n = 1; n <= 60; ++n) {
      const double v = three_point_lower_bound(f, u, n);
      if (v > top) top = v, arg = n;
    }
    EXPECT_EQ(best, arg) << u;
  }
  EXPECT_THROW(best_three_point_size(f, 1e-3, 5), InvalidParameter);
}

TEST(Sweep, CellsMatchSingleCalls) {
  const auto f = OrliczFunction::exp_power(1.0);
  const std::vector<double> us{2.0, 5.0};
  const std::vector<std::size_t> ns{2, 16, 64};
  const auto rep = ratio_sweep(f, us, ns, LabMode::exact, McOptions{.threads = 3});
  ASSERT_EQ(rep.records.size(), 6u);
  double d = 0.0;
  for (std::size_t i = 0; i < us.size(); ++i) {
    for (std::size_t j = 0; j < ns.size(); ++j) {
      const auto one = hj_ratio_three_point(f, us[i], ns[j], LabMode::exact);
      const auto& cell = rep.records[i * ns.size() + j];
      EXPECT_EQ(cell.u, us[i]);
      EXPECT_EQ(cell.n, ns[j]);
      EXPECT_EQ(*cell.ratio, *one.ratio);
      d = std::max(d, *one.ratio);
    }
  }
  EXPECT_EQ(*rep.empirical_d, d);
  EXPECT_THROW(ratio_sweep(f, {}, ns, LabMode::exact), InvalidParameter);
}

TEST(Sweep, MonteCarloIsThreadIndependent) {
  const auto f = OrliczFunction::exp_power(1.0);
  McOptions a{.samples = 4000, .seed = 9, .threads = 1};
  McOptions b{.samples = 4000, .seed = 9, .threads = 4};
  const auto ra = ratio_sweep(f, {2.0, 3.0}, {4, 8}, LabMode::monte_carlo, a);
  const auto rb = ratio_sweep(f, {2.0, 3.0}, {4, 8}, LabMode::monte_carlo, b);
  for (std::size_t i = 0; i < ra.records.size(); ++i) {
    EXPECT_EQ(*ra.records[i].ratio, *rb.records[i].ratio);
    EXPECT_EQ(ra.records[i].sum_norm.lo, rb.records[i].sum_norm.lo);
  }
}

TEST(LemmaSuite, SmallRunIsCleanAndDeterministic) {
  const auto a = lemma_suite(77, 60, 1);
  const auto b = lemma_suite(77, 60, 4);
  EXPECT_TRUE(a.violations.empty()) << a.violations.front().lemma << " " << a.violations.front().detail;
  EXPECT_GT(a.checks_tail_sum, 0u);
  EXPECT_GT(a.checks_orlicz_tail, 0u);
  EXPECT_GT(a.checks_symmetrization, 0u);
  EXPECT_GT(a.checks_l1_embedding, 0u);
  EXPECT_GT(a.checks_norm_of_mean, 0u);
  EXPECT_EQ(a.checks_tail_sum, b.checks_tail_sum);
  EXPECT_EQ(a.checks_orlicz_tail, b.checks_orlicz_tail);
  EXPECT_EQ(a.cases, 60u);
}

TEST(LemmaSuite, CaseFamiliesAreReproducible) {
  for (std::size_t i = 0; i < 10; ++i) {
    const auto x = lemma_case_family(5, i), y = lemma_case_family(5, i);
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t j = 0; j < x.size(); ++j) EXPECT_EQ(x.member(j).flat_values(), y.member(j).flat_values());
  }
}

TEST(Series, CounterexampleScheduleSeparatesTheBounds) {
  const auto ce = build_counterexample(OrliczFunction::exp_power(1.0), 10);
  std::string notice;
  const auto spec = series_schedule(ce.psi, ce.breakpoints, 3, &notice);
  ASSERT_EQ(spec.blocks.size(), 3u) << notice;
  for (std::size_t i = 1; i < spec.blocks.size(); ++i) EXPECT_GT(spec.blocks[i].u, spec.blocks[i - 1].u);
  const auto rep = series_experiment(ce.psi, spec);
  ASSERT_EQ(rep.records.size(), 3u);
  EXPECT_TRUE(rep.lower_reaches_k);
  EXPECT_TRUE(rep.upper_below_zeta2);
  EXPECT_LT(rep.sup_upper_bound, std::numbers::pi * std::numbers::pi / 6);
  double tail = 0.0;
  for (const auto& r : rep.records) {
    EXPECT_GE(r.lower_bound, r.k);
    tail += 1.0 / ce.psi.value(r.u);
    if (r.partial_sum_norm) {
      EXPECT_LE(r.lower_bound, r.partial_sum_norm->hi * (1 + 1e-9));
    }
  }
  EXPECT_NEAR(rep.tail_mass, tail, 1e-12);
  EXPECT_EQ(spec.offsets().back(), rep.records.back().m_next);
}

TEST(Series, ExpPsiStaysBounded) {
  const auto f = OrliczFunction::exp_power(1.0);
  const std::vector<double> bps{0.0, 2.0, 4.0, 8.0};
  const SeriesSpec spec{{{2.0, 2}, {4.0, 4}, {8.0, 8}}};
  const auto rep = series_experiment(f, spec);
  for (const auto& r : rep.records) EXPECT_LE(r.lower_bound, 1.5);
  EXPECT_FALSE(rep.lower_reaches_k);
  std::string notice;
  EXPECT_TRUE(series_schedule(f, bps, 3, &notice).blocks.size() < 3);
  EXPECT_FALSE(notice.empty());
}

namespace {

// Law of max_n |S_n| by enumerating all 3^N step sequences; keys in units of u.
std::map<int, double> path_max_oracle(double pm, double p0, double pp, int n) {
  std::map<int, double> out;
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    int c = code, s = 0, m = 0;
    double pr = 1.0;
    for (int i = 0; i < n; ++i, c /= 3) {
      const int step = c % 3 - 1;
      pr *= step < 0 ? pm : (step == 0 ? p0 : pp);
      s += step;
      m = std::max(m, std::abs(s));
    }
    out[m] += pr;
  }
  return out;
}

}  // namespace

TEST(QuantileRatio, PathMaxMatchesEnumeration) {
  hjtest::Gen g(47);
  for (int rep = 0; rep < 12; ++rep) {
    const int n = g.integer(1, 7);
    const double u = g.uniform(0.5, 3.0);
    const auto pr = g.probs(3);
    std::vector<double> vals, ps;
    for (int i = 0; i < 3; ++i) {
      if (pr[i] == 0.0) continue;
      vals.push_back((i - 1) * u);
      ps.push_back(pr[i]);
    }
    const auto law = path_max_distribution(FiniteDist::scalar(vals, ps), n);
    const auto want = path_max_oracle(pr[0], pr[1], pr[2], n);
    double seen = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      const int m = static_cast<int>(std::lround(law.value(i) / u));
      EXPECT_NEAR(law.value(i), m * u, 1e-12 * u);
      ASSERT_TRUE(want.count(m)) << m;
      EXPECT_NEAR(law.prob(i), want.at(m), 1e-12);
      seen += want.at(m);
    }
    EXPECT_NEAR(seen, 1.0, 1e-12);
  }
}

TEST(QuantileRatio, ThresholdAndNorms) {
  // Rademacher steps, N = 2: max |S_n| is 1 w.p. 1/2 and 2 w.p. 1/2
  const auto rad = FiniteDist::scalar({-1.0, 1.0}, {0.5, 0.5});
  const auto r = hj_quantile_ratio(rad, 2, OrliczFunction::power_law(1.0));
  EXPECT_NEAR(r.level, 0.125, 1e-15);
  EXPECT_EQ(r.t0, 2.0);
  EXPECT_NEAR(r.path_max_norm, 1.5, 1e-9);
  EXPECT_NEAR(r.max_norm, 1.0, 1e-9);
  EXPECT_NEAR(r.ratio, 0.5, 1e-9);
  // rare three-point steps: P(max > 0) <= level, so t0 = 0
  const auto tp = make_three_point(OrliczFunction::power_law(2.0), 8.0, 8);
  const auto q = hj_quantile_ratio(tp, 8, OrliczFunction::power_law(2.0));
  EXPECT_EQ(q.t0, 0.0);
  EXPECT_GE(q.path_max_norm, q.max_norm * (1 - 1e-9));
  EXPECT_THROW(hj_quantile_ratio(rad, 2, OrliczFunction::exp_power(1.0)), InvalidParameter);
  EXPECT_THROW(hj_quantile_ratio(FiniteDist::scalar({-1.0, 2.0}, {0.5, 0.5}), 2, OrliczFunction::power_law(1.0)),
               InvalidParameter);
}

TEST(QuantileRatio, BoundedOverRademacherAndThreePoint) {
  for (double p : {1.0, 2.0, 4.0}) {
    const auto f = OrliczFunction::power_law(p);
    for (std::size_t n : {1u, 4u, 16u, 64u, 256u}) {
      const auto a = hj_quantile_ratio(FiniteDist::scalar({-1.0, 1.0}, {0.5, 0.5}), n, f);
      const auto b = hj_quantile_ratio(make_three_point(f, 3.0, n), n, f);
      EXPECT_LT(a.ratio, 4.0) << p << " " << n;
      EXPECT_LT(b.ratio, 4.0) << p << " " << n;
    }
  }
}
