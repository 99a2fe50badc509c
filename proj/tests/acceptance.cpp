// Acceptance gate. `acceptance --criterion N` runs one criterion; no argument runs all.
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include <hjorlicz/cli.hpp>

using namespace hjorlicz;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20261018;

unsigned hw_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

void note(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void note(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  std::fputs("    ", stdout);
  std::vprintf(fmt, ap);
  std::fputc('\n', stdout);
  va_end(ap);
}

bool check(bool ok, const std::string& what) {
  note("%s %s", ok ? "ok  " : "FAIL", what.c_str());
  return ok;
}

std::string fmt(double x) {
  char b[64];
  std::snprintf(b, sizeof b, "%.6g", x);
  return b;
}

const OrliczFunction& psi1() {
  static const OrliczFunction f = OrliczFunction::exp_power(1.0);
  return f;
}

// ---------------------------------------------------------------------------

bool criterion1() {
  bool ok = true;
  const double pm = norm_exact(FiniteDist::point_mass(1.0), psi1()).value;
  ok &= check(std::abs(pm - 1.0 / std::numbers::ln2) <= 1e-9, "||1||_Psi1 = " + fmt(pm) + " vs 1/ln2");

  int atoms_ok = 0;
  double worst = 0.0;
  const std::vector<OrliczFunction> fs{OrliczFunction::power_law(2.0), OrliczFunction::exp_power(1.0),
                                       OrliczFunction::exp_power(0.5), OrliczFunction::heavy_tail_log(2.0)};
  for (const auto& f : fs) {
    for (double u : {2.0, 3.0, 5.0, 10.0, 20.0}) {
      const double lp = -f.log_value(u);
      const auto d = FiniteDist::scalar_log({0.0, u}, {log1m_exp(lp), lp});
      const double err = std::abs(norm_exact(d, f).value - 1.0);
      worst = std::max(worst, err);
      if (err <= 1e-9) ++atoms_ok;
    }
  }
  ok &= check(atoms_ok == 20, "single-atom norms = 1: " + std::to_string(atoms_ok) + "/20, worst error " + fmt(worst));

  // 50 configurations: family kind, functional and Psi cycle with the index.
  const std::vector<OrliczFunction> mc_psis{psi1(), OrliczFunction::power_law(2.0), OrliczFunction::exp_power(0.5)};
  int covered = 0;
  for (int i = 0; i < 50; ++i) {
    const auto& f = mc_psis[static_cast<std::size_t>(i % 3)];
    const Functional fn = (i / 3) % 2 == 0 ? Functional::sum_norm : Functional::max_norm;
    Family fam = Family::iid(FiniteDist::point_mass(0.0), 1);
    switch ((i / 6) % 3) {
      case 0: fam = Family::iid(FiniteDist::scalar({-1.0, 1.0}, {0.5, 0.5}), 4u << (i % 3)); break;
      case 1: fam = Family::iid(make_three_point(psi1(), 1.5, 8), 8); break;
      default: {
        RowRng rng(kSeed, 77, static_cast<std::uint64_t>(i));
        std::vector<FiniteDist> ms;
        for (int m = 0; m < 4; ++m) {
          const double a = std::round(rng.uniform() * 8.0) / 4.0 + 0.25;
          const double b = -std::round(rng.uniform() * 8.0) / 4.0;
          const double p = 0.2 + 0.6 * rng.uniform();
          ms.push_back(FiniteDist::scalar({b, a}, {1 - p, p}));
        }
        fam = Family::independent(std::move(ms));
      }
    }
    const FiniteDist law = fn == Functional::sum_norm ? sum_distribution_general(fam) : max_distribution(fam);
    const double exact = norm_exact(law, f).value;
    const auto est = norm_mc(fam, fn, f, 20000, kSeed + static_cast<std::uint64_t>(i));
    const bool in = est.lo <= exact && exact <= est.hi;
    if (in) {
      ++covered;
    } else {
      note("     config %d (%s, %s): exact %s outside [%s, %s]", i, f.describe().c_str(), functional_name(fn),
           fmt(exact).c_str(), fmt(est.lo).c_str(), fmt(est.hi).c_str());
    }
  }
  ok &= check(covered == 50, "MC 95% intervals containing the exact norm: " + std::to_string(covered) + "/50");
  return ok;
}

bool criterion2() {
  const auto rep = lemma_suite(kSeed, 1000, hw_threads());
  note("cases %zu, checks tail-sum %zu, orlicz-tail %zu, symmetrization %zu, l1 %zu, mean %zu", rep.cases, rep.checks_tail_sum, rep.checks_orlicz_tail,
       rep.checks_symmetrization, rep.checks_l1_embedding, rep.checks_norm_of_mean);
  for (std::size_t i = 0; i < std::min<std::size_t>(rep.violations.size(), 5); ++i) {
    const auto& v = rep.violations[i];
    note("     case %zu %s: %s lhs=%s rhs=%s", v.case_index, v.lemma.c_str(), v.detail.c_str(), fmt(v.lhs).c_str(),
         fmt(v.rhs).c_str());
  }
  return check(rep.violations.empty() && rep.cases == 1000, std::to_string(rep.violations.size()) + " violations");
}

bool criterion3() {
  bool ok = true;
  const std::vector<OrliczFunction> bounded{OrliczFunction::power_law(1.0),      OrliczFunction::power_law(2.0),
                                            OrliczFunction::power_law(4.0),      OrliczFunction::exp_power(0.5),
                                            OrliczFunction::exp_power(1.0),      OrliczFunction::heavy_tail_log(1.0),
                                            OrliczFunction::heavy_tail_log(2.0), OrliczFunction::heavy_tail_log(3.0)};
  for (const auto& f : bounded) {
    const auto r = check_hj(f);
    ok &= check(r.verdict == HJVerdict::bounded_on_grid,
                f.describe() + ": " + verdict_name(r.verdict) + " (grid K " + fmt(r.grid_k) + ")");
  }
  const auto sq = check_hj(OrliczFunction::exp_square());
  ok &= check(sq.verdict == HJVerdict::diverging, "exp_square: " + std::string(verdict_name(sq.verdict)));
  for (int depth = 3; depth <= 6; ++depth) {
    const auto ce = build_counterexample(psi1(), depth);
    const auto r = check_hj_schedule(ce.psi, ce.schedule());
    ok &= check(r.verdict == HJVerdict::diverging,
                "counterexample depth " + std::to_string(depth) + ": " + verdict_name(r.verdict));
  }
  // psi(su) / (s ln(1+s) + s psi(u)) with psi(x) = x^2 at s = u = 1e3
  const double s = 1e3, u = 1e3;
  const double direct = (s * u) * (s * u) / (s * std::log1p(s) + s * u * u);
  const double ratio = hj_ratio_at(OrliczFunction::exp_square(), s, u);
  ok &= check(std::abs(ratio - direct) <= 1e-12 * direct, "exp_square ratio at s=u=1e3 equals direct formula " + fmt(direct));
  ok &= check(ratio > 1e4, "exp_square ratio at s=u=1e3 = " + fmt(ratio) + " exceeds 1e4");
  return ok;
}

bool criterion4() {
  bool ok = true;
  const auto ce = build_counterexample(psi1(), 4);
  ok &= check(ce.complete && ce.depth == 4, "depth " + std::to_string(ce.depth) + " of 4");
  auto min_margin = [](const std::vector<KMargin>& v) {
    double m = kInf;
    for (const auto& k : v) m = std::min(m, k.margin);
    return m;
  };
  ok &= check(min_margin(ce.margin_ii) > 0, "(ii) u_{k+1} >= k u_k, min log margin " + fmt(min_margin(ce.margin_ii)));
  ok &= check(min_margin(ce.margin_iii) > 0, "(iii) Psi(k u_k) target, min log margin " + fmt(min_margin(ce.margin_iii)));
  ok &= check(min_margin(ce.margin_iv) > 0, "(iv) slope below Phi', min log margin " + fmt(min_margin(ce.margin_iv)));
  ok &= check(min_margin(ce.margin_v) > 0, "(v) Phi-extension target, min log margin " + fmt(min_margin(ce.margin_v)));
  // (iii) recomputed here from ln Psi
  bool direct = true;
  for (int k = 2; k <= ce.depth; ++k) {
    const double kk = static_cast<double>(k) * k;
    const double lhs = ce.psi.log_value(k * ce.u(k));
    const double rhs = std::log(k) + kk * std::log(k) + kk * ce.psi.log_value(ce.u(k));
    direct = direct && lhs > rhs;
  }
  ok &= check(direct, "Psi(k u_k) > k k^{k^2} Psi(u_k)^{k^2} recomputed for k = 2..4");
  ok &= check(ce.dominated && ce.audit_margin >= 0, "Psi <= Phi on audit grid, margin " + fmt(ce.audit_margin));
  ok &= check(validate(ce.psi).ok(), "Psi validates as an Orlicz function");
  return ok;
}

bool criterion5() {
  bool ok = true;
  std::vector<double> us;
  for (int u = 2; u <= 10; ++u) us.push_back(u);
  std::vector<std::size_t> ns;
  for (std::size_t n = 2; n <= 1024; n *= 2) ns.push_back(n);
  McOptions mc;
  mc.threads = hw_threads();
  const auto rep = ratio_sweep(psi1(), us, ns, LabMode::exact, mc);
  ok &= check(rep.empirical_d && *rep.empirical_d <= 20.0,
              "Psi1 exact sweep over 90 cells: empirical D = " + fmt(rep.empirical_d.value_or(std::nan(""))));

  const auto ce = build_counterexample(psi1(), 6);
  std::vector<double> lower;
  for (int n = 2; n <= 4; ++n) {
    const double u = ce.u(n);
    const std::size_t N = best_three_point_size(ce.psi, u, static_cast<std::size_t>(n) * n * n);
    const auto r = hj_ratio_three_point(ce.psi, u, N, LabMode::exact);
    lower.push_back(r.ratio_lower.value_or(0.0));
    note("n=%d u_n=%s N=%zu certified ratio >= %s", n, fmt(u).c_str(), N, fmt(lower.back()).c_str());
  }
  for (std::size_t i = 1; i < lower.size(); ++i) {
    ok &= check(lower[i] >= 1.5 * lower[i - 1], "step " + std::to_string(i + 1) + " -> " + std::to_string(i + 2) +
                                                     " factor " + fmt(lower[i] / lower[i - 1]));
  }
  return ok;
}

bool criterion6() {
  bool ok = true;
  const auto ce = build_counterexample(psi1(), 12);
  std::string notice;
  const auto spec = series_schedule(ce.psi, ce.breakpoints, 4, &notice);
  ok &= check(spec.blocks.size() == 4, "schedule has " + std::to_string(spec.blocks.size()) + " of 4 blocks " + notice);
  const auto rep = series_experiment(ce.psi, spec);
  for (const auto& r : rep.records) {
    ok &= check(r.lower_bound >= r.k, "k=" + std::to_string(r.k) + " certified ||S_m|| >= " + fmt(r.lower_bound));
  }
  ok &= check(rep.records.size() == 4, std::to_string(rep.records.size()) + " series records");
  ok &= check(rep.sup_upper_bound < std::numbers::pi * std::numbers::pi / 6,
              "||sup |X_n| || <= " + fmt(rep.sup_upper_bound) + " < pi^2/6");

  // same schedule under Psi1: ||S_m|| <= sum_j ||block_j|| / j^2
  const auto cmp = series_experiment(psi1(), spec);
  double tri = 0.0, worst = 0.0;
  for (const auto& r : cmp.records) {
    tri += r.block_norm.hi / (static_cast<double>(r.k) * r.k);
    worst = std::max(worst, tri);
    note("Psi1 k=%d: %s <= ||S_m|| <= %s", r.k, fmt(r.lower_bound).c_str(), fmt(tri).c_str());
  }
  ok &= check(cmp.records.size() == rep.records.size() && worst <= 20.0, "Psi1 per-k values bounded by " + fmt(worst));
  return ok;
}

bool crucial_grid(const Family& fam, CrucialMode mode, std::size_t samples, const std::string& label,
                  double* M_out = nullptr) {
  CrucialOptions opt;
  opt.mode = mode;
  opt.samples = samples;
  opt.seed = kSeed;
  opt.threads = hw_threads();
  const double M = crucial_lemma_check(fam, {{2, 1, 1.0, 1.0}}, opt).front().M;
  std::vector<CrucialLemmaParams> params;
  for (int q : {2, 3, 4})
    for (int k : {1, 2, 4})
      for (double f : {0.25, 1.0, 4.0}) params.push_back({q, k, f * M, f * M});
  const auto res = crucial_lemma_check(fam, params, opt);
  int pass = 0;
  for (const auto& r : res) {
    if (r.pass) {
      ++pass;
    } else {
      note("     q=%d k=%d u=%s: lhs %s > rhs %s", r.params.q, r.params.k, fmt(r.params.u).c_str(), fmt(r.lhs).c_str(),
           fmt(r.rhs).c_str());
    }
  }
  if (M_out) *M_out = M;
  return check(pass == 27 && res.front().lhs_method == (mode == CrucialMode::exact ? Method::exact : Method::monte_carlo),
               label + ": " + std::to_string(pass) + "/27 pass, M = " + fmt(M));
}

bool criterion7() {
  bool ok = true;
  const std::size_t N = 8;
  const auto rad = Family::iid(FiniteDist::scalar({-1.0, 1.0}, {0.5, 0.5}), N);
  double M = 0.0;
  ok &= crucial_grid(rad, CrucialMode::exact, 1000, "exact Rademacher N=8", &M);
  // E|sum eps_i X_i| by enumerating all 2^N sign patterns and 2^N atoms
  double m_enum = 0.0;
  for (unsigned xs = 0; xs < (1u << N); ++xs)
    for (unsigned es = 0; es < (1u << N); ++es) {
      double s = 0.0;
      for (std::size_t i = 0; i < N; ++i) s += ((xs >> i) & 1 ? 1.0 : -1.0) * ((es >> i) & 1 ? 1.0 : -1.0);
      m_enum += std::abs(s);
    }
  m_enum /= static_cast<double>(1u << (2 * N));
  ok &= check(std::abs(m_enum - M) <= 1e-12, "M matches 2^N enumeration " + fmt(m_enum));
  const auto tp = Family::iid(make_three_point(psi1(), 2.0, 64), 64);
  ok &= crucial_grid(tp, CrucialMode::monte_carlo, 100000, "monte-carlo three-point N=64, n=1e5");
  return ok;
}

bool criterion8() {
  bool ok = true;
  const auto spec = rademacher_projection_spec(4, 16);
  ProcessOptions opt;
  opt.samples = 100000;
  opt.seed = kSeed;
  opt.threads = hw_threads();
  const auto res = empirical_process_tail(spec, psi1(), opt);
  note("U = %s, Sigma^2 = %s, E S = %s [%s, %s]", fmt(res.stats.U).c_str(), fmt(res.stats.sigma2.value).c_str(),
       fmt(res.stats.es.value).c_str(), fmt(res.stats.es.lo).c_str(), fmt(res.stats.es.hi).c_str());
  for (BoundId b : {BoundId::bennett, BoundId::bernstein}) {
    const auto cal = calibrate_c(res.curve, b, res.stats, psi1());
    ok &= check(cal.c.has_value(), std::string(bound_name(b)) + " feasible c = " + (cal.c ? fmt(*cal.c) : "none"));
  }
  const auto br = bennett_bernstein_ratio(psi1(), res.stats.U, res.stats.sigma2.value, 1.0, res.curve.t, 10.0);
  ok &= check(br.growth_ok, "Psi1 at most exponential (top " + fmt(br.growth_top) + ", prev " + fmt(br.growth_prev) + ")");
  ok &= check(br.bounded && br.max_ratio <= 10.0, "bennett/bernstein max ratio " + fmt(br.max_ratio) + " <= 10");
  return ok;
}

bool criterion9() {
  bool ok = true;
  const auto rep = poisson_check(psi1(), default_poisson_u_grid(psi1()), {4.0, 8.0, 16.0}, 1000);
  bool holds = true;
  for (const auto& c : rep.cells) {
    holds = holds && c.log_binomial_tail >= -rep.c_fitted * rep.c_fitted * c.exponent - 1e-12;
  }
  ok &= check(holds && rep.cells.size() == 12, "binomial tail >= exp(-C^2 (s ln(1+s) + s psi(u))) on 12 cells");
  ok &= check(rep.c_fitted <= 20.0, "fitted C = " + fmt(rep.c_fitted) + " <= 20");
  ok &= check(rep.discrepancy_non_increasing, "binomial-Poisson discrepancy non-increasing over N = 1e2, 1e3, 1e4");
  return ok;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool criterion10() {
  bool ok = true;
  const fs::path root = fs::temp_directory_path() / ("hjorlicz_acceptance_" + std::to_string(::getpid()));
  const std::vector<std::pair<std::string, std::string>> runs{
      {"norm", R"({"psi": {"family": "exp_power", "alpha": 1}, "method": "monte-carlo", "samples": 20000,
                   "family": {"kind": "three_point", "u": 2, "n": 16}, "functional": "sum"})"},
      {"ratio-sweep", R"({"psi": {"family": "exp_power", "alpha": 1}, "mode": "monte-carlo", "samples": 5000,
                          "u_grid": [2, 4], "n_grid": [4, 16]})"},
      {"tails", R"({"psi": {"family": "exp_power", "alpha": 1}, "samples": 20000})"},
      {"calibrate", R"({"psi": {"family": "exp_power", "alpha": 1}, "samples": 20000})"},
      {"verify-lemmas", R"({"cases": 100})"},
      {"crucial-check", R"({"family": {"kind": "three_point", "u": 2, "n": 32}, "mode": "monte-carlo",
                            "samples": 20000, "psi": {"family": "exp_power", "alpha": 1}})"}};
  for (const auto& [cmd, text] : runs) {
    RunConfig rc;
    try {
      rc = parse_config(text, cmd);
    } catch (const std::exception& e) {
      ok &= check(false, cmd + ": config rejected: " + e.what());
      continue;
    }
    rc.seed = kSeed;
    for (const std::string format : {"csv", "json"}) {
      std::vector<std::vector<std::string>> outs;
      for (unsigned t : {1u, 3u, 8u}) {
        rc.threads = t;
        rc.format = format;
        rc.out = (root / (cmd + "_" + format + "_" + std::to_string(t))).string();
        std::vector<std::string> w;
        std::ostringstream err;
        const int st = run_and_write(rc, err, &w);
        if (st != kExitOk && st != kExitVerification) note("     %s: %s", cmd.c_str(), err.str().c_str());
        outs.push_back(w);
      }
      bool same = !outs[0].empty();
      for (std::size_t k = 1; k < outs.size(); ++k) {
        same = same && outs[k].size() == outs[0].size();
        for (std::size_t i = 0; same && i < outs[0].size(); ++i) same = slurp(outs[0][i]) == slurp(outs[k][i]);
      }
      ok &= check(same, cmd + " (" + format + "): byte-identical across 1, 3, 8 threads");
    }
  }
  fs::remove_all(root);
  return ok;
}

struct Criterion {
  const char* title;
  double limit_s;
  std::function<bool()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c{
      {"norm engine exactness", 60, criterion1},
      {"lemma suite", 120, criterion2},
      {"(HJ) checker", 10, criterion3},
      {"counterexample construction", 5, criterion4},
      {"HJ ratio dichotomy", 120, criterion5},
      {"series experiment", 60, criterion6},
      {"crucial lemma", 300, criterion7},
      {"concentration calibration", 300, criterion8},
      {"Poisson check", 60, criterion9},
      {"determinism", 60, criterion10},
  };
  return c;
}

bool run_one(std::size_t n) {
  const auto& c = criteria().at(n - 1);
  std::printf("criterion %zu: %s\n", n, c.title);
  std::fflush(stdout);
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    ok = c.run();
  } catch (const std::exception& e) {
    note("FAIL exception: %s", e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool fast = secs < c.limit_s;
  check(fast, "runtime " + fmt(secs) + " s (limit " + fmt(c.limit_s) + " s)");
  std::printf("%s criterion %zu %s\n", ok && fast ? "PASS" : "FAIL", n, c.title);
  std::fflush(stdout);
  return ok && fast;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> which;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      which.push_back(static_cast<std::size_t>(std::strtoul(argv[++i], nullptr, 10)));
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion N]...\n");
      return 2;
    }
  }
  if (which.empty())
    for (std::size_t n = 1; n <= criteria().size(); ++n) which.push_back(n);
  int failed = 0;
  for (std::size_t n : which) {
    if (n < 1 || n > criteria().size()) {
      std::fprintf(stderr, "no criterion %zu\n", n);
      return 2;
    }
    if (!run_one(n)) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
