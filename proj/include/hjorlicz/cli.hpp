#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "concentration.hpp"
#include "config.hpp"
#include "counterexample.hpp"
#include "dist_ops.hpp"
#include "errors.hpp"
#include "hj_condition.hpp"
#include "inequality_lab.hpp"
#include "orlicz_norm.hpp"
#include "report.hpp"
#include "serialize.hpp"

namespace hjorlicz {

enum ExitCode : int { kExitOk = 0, kExitVerification = 1, kExitUsage = 2, kExitResource = 3 };

struct RunOutcome {
  Report report;
  int status = kExitOk;
};

namespace cli {

inline std::uint64_t require_seed(const RunConfig& rc) {
  if (!rc.seed) throw InvalidParameter("command '" + rc.command + "' samples at random: a seed is required (--seed N)");
  return *rc.seed;
}

inline const OrliczFunction& require_psi(const RunConfig& rc) {
  if (!rc.psi) throw InvalidParameter("command '" + rc.command + "' needs 'psi' in the config");
  return *rc.psi;
}

inline std::size_t get_size(const json& p, const char* key) { return static_cast<std::size_t>(p.at(key).get<std::uint64_t>()); }

inline std::string method_tag(Method m) { return method_name(m); }

inline Cell finite_or_null(double x) { return std::isnan(x) ? Cell(std::monostate{}) : Cell(x); }

// meta JSON cannot carry non-finite numbers
inline json meta_number(double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); }

inline RunOutcome run_norm(const RunConfig& rc) {
  const auto& p = rc.params;
  const OrliczFunction& psi = require_psi(rc);
  const std::string h = spec_hash(psi);
  RunOutcome out;
  out.report.name = "norm";
  Table t("norm", {"psi", "functional", "value", "lo", "hi", "samples"});
  const std::string method = p.at("method").get<std::string>();
  if (method != "exact" && method != "monte-carlo") throw InvalidParameter("config: 'method' must be exact or monte-carlo");
  const std::string fn = p.at("functional").get<std::string>();
  if (fn != "sum" && fn != "max") throw InvalidParameter("config: 'functional' must be sum or max");
  const double tol = p.at("tolerance").get<double>();
  const std::size_t budget = get_size(p, "budget");
  NormEstimate e;
  std::string what;
  std::optional<std::uint64_t> seed;
  if (!p.at("distribution").is_null()) {
    if (!p.at("family").is_null()) throw InvalidParameter("config: give either 'distribution' or 'family', not both");
    const FiniteDist d = parse_distribution(p.at("distribution"));
    what = "distribution";
    if (method == "exact") {
      e = norm_exact(d, psi, tol);
    } else {
      seed = require_seed(rc);
      e = norm_mc(Family::iid(d, 1), Functional::sum_norm, psi, get_size(p, "samples"), *seed, rc.threads);
    }
  } else if (!p.at("family").is_null()) {
    const Family fam = parse_family(p.at("family"), &psi);
    const Functional f = fn == "sum" ? Functional::sum_norm : Functional::max_norm;
    what = functional_name(f);
    if (method == "exact") {
      FiniteDist law = f == Functional::max_norm ? max_distribution(fam, budget) : sum_distribution_general(fam, budget);
      e = norm_exact(law, psi, tol);
    } else {
      seed = require_seed(rc);
      e = norm_mc(fam, f, psi, get_size(p, "samples"), *seed, rc.threads);
    }
  } else {
    throw InvalidParameter("config: norm needs 'distribution' or 'family'");
  }
  t.add(h, seed, method_tag(e.method),
        {psi.describe(), what, e.value, e.lo, e.hi, static_cast<std::int64_t>(e.samples)});
  out.report.tables.push_back(std::move(t));
  return out;
}

inline void add_hj_tables(Report& r, const HJConditionReport& hj, const std::string& h, const std::string& psi_desc) {
  Table s("check_hj", {"psi", "verdict", "grid_k", "trend", "bottom_max", "top_max", "k_prime_needed",
                       "hj_prime_consistent", "k_hat_needed", "inverse_bound_skipped", "delta2_max", "delta2_bounded",
                       "poly_k", "poly_p", "polynomial", "schedule"});
  s.add(h, std::nullopt, "exact",
        {psi_desc, std::string(verdict_name(hj.verdict)), hj.grid_k, hj.trend, hj.bottom_max, hj.top_max,
         hj.k_prime_needed, hj.hj_prime_consistent, hj.k_hat_needed, static_cast<std::int64_t>(hj.inverse_bound_skipped),
         hj.delta2_max, hj.delta2_bounded, hj.poly_k, hj.poly_p, hj.polynomial, hj.schedule});
  Table g("check_hj_grid", {"s", "u", "ratio"});
  for (const auto& pt : hj.grid) g.add(h, std::nullopt, "exact", {pt.s, pt.u, pt.ratio});
  r.tables.push_back(std::move(s));
  r.tables.push_back(std::move(g));
}

inline RunOutcome run_check_hj(const RunConfig& rc) {
  const OrliczFunction& psi = require_psi(rc);
  const auto sg = parse_grid(rc.params.at("s_grid"), "s_grid");
  const auto ug = parse_grid(rc.params.at("u_grid"), "u_grid");
  RunOutcome out;
  out.report.name = "check_hj";
  add_hj_tables(out.report, check_hj(psi, sg, ug), spec_hash(psi), psi.describe());
  return out;
}

inline RunOutcome run_counterexample(const RunConfig& rc) {
  const OrliczFunction& phi = *rc.phi;
  const auto n_max = static_cast<int>(get_size(rc.params, "n_max"));
  const CounterexampleResult ce = build_counterexample(phi, n_max);
  const std::string h = spec_hash(ce.psi);
  RunOutcome out;
  out.report.name = "counterexample";
  out.report.meta = {{"phi", to_json(phi)},
                     {"psi", to_json(ce.psi)},
                     {"requested_depth", ce.requested_depth},
                     {"depth", ce.depth},
                     {"complete", ce.complete},
                     {"notice", ce.notice},
                     {"audit_margin", meta_number(ce.audit_margin)},
                     {"dominated", ce.dominated}};
  Table b("counterexample_breakpoints", {"k", "u", "log_psi", "log_slope"});
  for (std::size_t i = 0; i < ce.breakpoints.size(); ++i) {
    b.add(h, std::nullopt, "exact",
          {static_cast<std::int64_t>(i + 1), ce.breakpoints[i], ce.log_values[i], ce.log_slopes[i]});
  }
  Table m("counterexample_margins", {"condition", "k", "margin"});
  auto put = [&](const char* name, const std::vector<KMargin>& v) {
    for (const auto& km : v) m.add(h, std::nullopt, "exact", {std::string(name), static_cast<std::int64_t>(km.k), km.margin});
  };
  put("ii", ce.margin_ii);
  put("iii", ce.margin_iii);
  put("iv", ce.margin_iv);
  put("v", ce.margin_v);
  out.report.tables.push_back(std::move(b));
  out.report.tables.push_back(std::move(m));
  add_hj_tables(out.report, check_hj_schedule(ce.psi, ce.schedule()), h, "counterexample");
  out.status = ce.all_margins_positive() ? kExitOk : kExitVerification;
  return out;
}

inline void add_ratio_row(Table& t, const std::string& h, std::optional<std::uint64_t> seed, const RatioRecord& r) {
  t.add(h, seed, method_tag(r.method),
        {r.family, static_cast<std::int64_t>(r.n), r.u, r.sum_norm.value, r.sum_norm.lo, r.sum_norm.hi, r.l1,
         r.max_norm.value, r.max_norm.hi, opt_cell(r.ratio), opt_cell(r.a_low), opt_cell(r.ratio_lower)});
}

inline const std::vector<std::string>& ratio_columns() {
  static const std::vector<std::string> c{"family",   "n",        "u",      "sum_norm", "sum_norm_lo", "sum_norm_hi",
                                          "l1",       "max_norm", "max_norm_hi", "ratio", "a_low",      "ratio_lower"};
  return c;
}

inline RunOutcome run_ratio_sweep(const RunConfig& rc) {
  const auto& p = rc.params;
  RunOutcome out;
  out.report.name = "ratio_sweep";
  const std::string mode_s = p.at("mode").get<std::string>();
  if (mode_s != "exact" && mode_s != "monte-carlo") throw InvalidParameter("config: 'mode' must be exact or monte-carlo");
  const LabMode mode = mode_s == "exact" ? LabMode::exact : LabMode::monte_carlo;
  McOptions mc;
  mc.samples = get_size(p, "samples");
  mc.threads = rc.threads;
  std::optional<std::uint64_t> seed;
  if (mode == LabMode::monte_carlo) {
    seed = require_seed(rc);
    mc.seed = *seed;
  }
  if (!p.at("schedule").is_null()) {
    // Three-point ratios along the counterexample breakpoints (n, u_n), N <= n^3.
    const json& s = p.at("schedule");
    detail::reject_unknown_keys(s, {"phi", "n_max", "steps"}, "config: schedule");
    const OrliczFunction phi = parse_validated_psi(s.value("phi", detail::psi1_json()), "schedule.phi");
    const int n_max = s.value("n_max", 6);
    const int steps = s.value("steps", 4);
    const CounterexampleResult ce = build_counterexample(phi, n_max);
    const std::string h = spec_hash(ce.psi);
    Table t("ratio_schedule", [] {
      std::vector<std::string> c{"step"};
      c.insert(c.end(), ratio_columns().begin(), ratio_columns().end());
      return c;
    }());
    std::optional<double> prev;
    bool increasing = true;
    double min_factor = kInf;
    for (int n = 2; n <= std::min(steps, ce.depth); ++n) {
      const double u = ce.u(n);
      const std::size_t N = best_three_point_size(ce.psi, u, static_cast<std::size_t>(n) * n * n);
      RatioRecord r = hj_ratio_three_point(ce.psi, u, N, mode, mc);
      std::vector<Cell> row{static_cast<std::int64_t>(n)};
      Table tmp("tmp", ratio_columns());
      add_ratio_row(tmp, h, seed, r);
      row.insert(row.end(), tmp.rows[0].begin() + 4, tmp.rows[0].end());
      t.add(h, seed, method_tag(r.method), row);
      const double v = r.ratio_lower.value_or(0.0);
      if (prev) {
        increasing = increasing && v > *prev;
        min_factor = std::min(min_factor, *prev > 0 ? v / *prev : kInf);
      }
      prev = v;
    }
    out.report.meta = {{"schedule_psi", to_json(ce.psi)},
                       {"ratio_lower_increasing", increasing},
                       {"min_step_factor", meta_number(min_factor)}};
    out.report.tables.push_back(std::move(t));
    return out;
  }
  const OrliczFunction& psi = require_psi(rc);
  const auto ug = parse_grid(p.at("u_grid"), "u_grid");
  const auto ng = parse_size_list(p.at("n_grid"), "n_grid");
  const RatioReport rep = ratio_sweep(psi, ug, ng, mode, mc);
  const std::string h = spec_hash(psi);
  Table t("ratio_sweep", ratio_columns());
  for (const auto& r : rep.records) add_ratio_row(t, h, seed, r);
  out.report.meta = {{"psi", to_json(psi)},
                     {"mode", rep.mode},
                     {"empirical_d", rep.empirical_d ? meta_number(*rep.empirical_d) : json(nullptr)}};
  out.report.tables.push_back(std::move(t));
  if (p.at("quantile").get<bool>()) {
    Table q("quantile_ratio", {"u", "n", "p", "level", "t0", "path_max_norm", "max_norm", "ratio"});
    for (double u : ug)
      for (std::size_t n : ng) {
        const auto r = hj_quantile_ratio(make_three_point(psi, u, n), n, psi);
        q.add(h, std::nullopt, "exact",
              {u, static_cast<std::int64_t>(n), r.p, r.level, r.t0, r.path_max_norm, r.max_norm, r.ratio});
      }
    out.report.tables.push_back(std::move(q));
  }
  return out;
}

inline RunOutcome run_series(const RunConfig& rc) {
  const auto& p = rc.params;
  const OrliczFunction& phi = *rc.phi;
  const CounterexampleResult ce = build_counterexample(phi, static_cast<int>(get_size(p, "n_max")));
  std::string notice;
  const SeriesSpec spec = series_schedule(ce.psi, ce.breakpoints, static_cast<int>(get_size(p, "k_max")), &notice);
  const std::size_t budget = get_size(p, "budget");
  RunOutcome out;
  out.report.name = "series";
  Table t("series", {"psi", "k", "u", "n", "m_next", "a_low", "block_norm", "lower_bound", "partial_sum_norm",
                     "block_max_norm", "upper_bound"});
  auto emit = [&](const OrliczFunction& psi, const std::string& label) {
    const SeriesReport s = series_experiment(psi, spec, budget);
    const std::string h = spec_hash(psi);
    for (const auto& r : s.records) {
      t.add(h, std::nullopt, "exact",
            {label, static_cast<std::int64_t>(r.k), r.u, static_cast<std::int64_t>(r.n),
             static_cast<std::int64_t>(r.m_next), r.a_low, r.block_norm.value, r.lower_bound,
             r.partial_sum_norm ? Cell(r.partial_sum_norm->value) : Cell(std::monostate{}), r.block_max_norm,
             r.upper_bound});
    }
    return s;
  };
  const SeriesReport main = emit(ce.psi, "counterexample");
  json meta = {{"psi", to_json(ce.psi)},
               {"sup_upper_bound", meta_number(main.sup_upper_bound)},
               {"zeta2", std::numbers::pi * std::numbers::pi / 6.0},
               {"upper_below_zeta2", main.upper_below_zeta2},
               {"lower_reaches_k", main.lower_reaches_k},
               {"tail_mass", meta_number(main.tail_mass)},
               {"schedule_notice", notice},
               {"notice", main.notice}};
  if (!p.at("compare_psi").is_null()) {
    const OrliczFunction cmp = parse_validated_psi(p.at("compare_psi"), "compare_psi");
    const SeriesReport c = emit(cmp, cmp.describe());
    double mx = 0.0;
    for (const auto& r : c.records) mx = std::max(mx, r.lower_bound);
    meta["compare_psi"] = to_json(cmp);
    meta["compare_max_lower_bound"] = meta_number(mx);
  }
  out.report.meta = meta;
  out.report.tables.push_back(std::move(t));
  return out;
}

struct ProcessRun {
  EmpiricalProcessSpec spec;
  ProcessResult result;
  std::optional<std::uint64_t> seed;
};

inline ProcessRun run_process(const RunConfig& rc, const OrliczFunction& psi) {
  const auto& p = rc.params;
  ProcessRun pr;
  pr.spec = parse_process(p.at("process"));
  ProcessOptions opt;
  opt.samples = get_size(p, "samples");
  opt.threads = rc.threads;
  opt.prefer_exact = p.at("exact").get<bool>();
  opt.budget = get_size(p, "budget");
  if (!p.at("t_grid").is_null()) opt.t_grid = parse_grid(p.at("t_grid"), "t_grid");
  if (!opt.prefer_exact) {
    pr.seed = require_seed(rc);
    opt.seed = *pr.seed;
  }
  pr.result = empirical_process_tail(pr.spec, psi, opt);
  if (opt.prefer_exact && pr.result.curve.method != Method::exact) {
    throw ResourceError("tails: exact joint law exceeds the atom budget; set \"exact\": false and give --seed");
  }
  return pr;
}

inline json stats_meta(const ProcessStats& s) {
  return {{"U", meta_number(s.U)},
          {"sigma2", meta_number(s.sigma2.value)},
          {"sigma2_lo", meta_number(s.sigma2.lo)},
          {"sigma2_hi", meta_number(s.sigma2.hi)},
          {"es", meta_number(s.es.value)},
          {"es_lo", meta_number(s.es.lo)},
          {"es_hi", meta_number(s.es.hi)},
          {"mean_max", meta_number(s.mean_max)},
          {"U_phi", meta_number(s.U_phi)},
          {"method", method_name(s.es.method)}};
}

inline RunOutcome run_tails(const RunConfig& rc) {
  const OrliczFunction& psi = require_psi(rc);
  const ProcessRun pr = run_process(rc, psi);
  const double c = rc.params.at("c").get<double>();
  const std::string h = spec_hash(psi);
  const auto& st = pr.result.stats;
  const auto& cv = pr.result.curve;
  RunOutcome out;
  out.report.name = "tails";
  out.report.meta = stats_meta(st);
  Table t("tails", {"t", "survival", "lo", "hi", "c", "bennett", "bennett_bounded_class", "bernstein",
                    "bernstein_equivalent", "convex"});
  const OrliczFunction phi = psi.square_composed();
  for (std::size_t i = 0; i < cv.t.size(); ++i) {
    const double x = cv.t[i];
    t.add(h, pr.seed, method_tag(cv.method),
          {x, cv.survival[i], cv.lo[i], cv.hi[i], c, bennett_rhs(x, st.U, st.sigma2.value, c, psi).raw,
           bennett_rhs(x, st.U, st.sigma2.value, c, psi, false).raw, bernstein_rhs(x, st.U, st.sigma2.value, c, psi).raw,
           bernstein_rhs(x, st.U, st.sigma2.value, c, psi, true).raw, convex_rhs(x, st.mean_max, st.U_phi, c, phi).raw});
  }
  out.report.tables.push_back(std::move(t));
  return out;
}

inline RunOutcome run_calibrate(const RunConfig& rc) {
  const OrliczFunction& psi = require_psi(rc);
  const auto& p = rc.params;
  const ProcessRun pr = run_process(rc, psi);
  const std::vector<double> grid = p.at("c_grid").is_null() ? default_c_grid() : parse_grid(p.at("c_grid"), "c_grid");
  const std::string h = spec_hash(psi);
  const std::string m = method_tag(pr.result.curve.method);
  RunOutcome out;
  out.report.name = "calibrate";
  json meta = stats_meta(pr.result.stats);
  Table t("calibrate", {"bound", "c", "feasible", "selected"});
  json chosen = json::object();
  for (const auto& b : p.at("bounds")) {
    const std::string name = b.get<std::string>();
    BoundId id;
    if (name == "bennett") id = BoundId::bennett;
    else if (name == "bernstein") id = BoundId::bernstein;
    else if (name == "convex") id = BoundId::convex;
    else throw InvalidParameter("config: unknown bound '" + name + "'");
    const Calibration cal = calibrate_c(pr.result.curve, id, pr.result.stats, psi, grid);
    for (std::size_t i = 0; i < cal.c_grid.size(); ++i) {
      t.add(h, pr.seed, m, {name, cal.c_grid[i], static_cast<bool>(cal.feasible[i]), cal.c && *cal.c == cal.c_grid[i]});
    }
    chosen[name] = cal.c ? json(*cal.c) : json(nullptr);
  }
  meta["c"] = chosen;
  const BoundRatioCheck rr = bennett_bernstein_ratio(psi, pr.result.stats.U, pr.result.stats.sigma2.value, 1.0,
                                                     pr.result.curve.t, p.at("ratio_limit").get<double>());
  Table r("bound_ratio", {"t", "bennett_over_bernstein"});
  for (std::size_t i = 0; i < rr.t.size(); ++i) r.add(h, pr.seed, m, {rr.t[i], rr.ratio[i]});
  meta["ratio"] = {{"growth_ok", rr.growth_ok},
                   {"max_ratio", meta_number(rr.max_ratio)},
                   {"max_reverse_ratio", meta_number(rr.max_reverse_ratio)},
                   {"bounded", rr.bounded}};
  out.report.meta = meta;
  out.report.tables.push_back(std::move(t));
  out.report.tables.push_back(std::move(r));
  return out;
}

inline RunOutcome run_verify_lemmas(const RunConfig& rc) {
  const std::uint64_t seed = require_seed(rc);
  const std::size_t cases = get_size(rc.params, "cases");
  const LemmaSuiteReport rep = lemma_suite(seed, cases, rc.threads);
  RunOutcome out;
  out.report.name = "verify_lemmas";
  Table s("verify_lemmas", {"cases", "checks_tail_sum", "checks_orlicz_tail", "checks_symmetrization", "checks_l1_embedding", "checks_norm_of_mean", "violations"});
  s.add("", seed, "exact",
        {static_cast<std::int64_t>(rep.cases), static_cast<std::int64_t>(rep.checks_tail_sum),
         static_cast<std::int64_t>(rep.checks_orlicz_tail), static_cast<std::int64_t>(rep.checks_symmetrization),
         static_cast<std::int64_t>(rep.checks_l1_embedding), static_cast<std::int64_t>(rep.checks_norm_of_mean),
         static_cast<std::int64_t>(rep.violations.size())});
  Table v("lemma_violations", {"case", "psi", "lemma", "detail", "lhs", "rhs"});
  const auto psis = lemma_suite_functions();
  for (const auto& x : rep.violations) {
    const auto& f = psis[x.case_index % psis.size()];
    v.add(spec_hash(f), seed, "exact",
          {static_cast<std::int64_t>(x.case_index), f.describe(), x.lemma, x.detail, x.lhs, x.rhs});
  }
  out.report.tables.push_back(std::move(s));
  out.report.tables.push_back(std::move(v));
  out.status = rep.violations.empty() ? kExitOk : kExitVerification;
  return out;
}

inline RunOutcome run_crucial(const RunConfig& rc) {
  const auto& p = rc.params;
  const Family fam = parse_family(p.at("family"), rc.psi ? &*rc.psi : nullptr);
  CrucialOptions opt;
  const std::string mode = p.at("mode").get<std::string>();
  if (mode == "auto") opt.mode = CrucialMode::automatic;
  else if (mode == "exact") opt.mode = CrucialMode::exact;
  else if (mode == "monte-carlo") opt.mode = CrucialMode::monte_carlo;
  else throw InvalidParameter("config: 'mode' must be auto, exact or monte-carlo");
  opt.samples = get_size(p, "samples");
  opt.threads = rc.threads;
  opt.budget = get_size(p, "budget");
  std::optional<std::uint64_t> seed;
  bool exact_ok = false;
  if (opt.mode != CrucialMode::monte_carlo) {
    try {
      (void)rademacher_sum_distribution(fam, opt.budget);
      exact_ok = true;
    } catch (const ResourceError&) {
      if (opt.mode == CrucialMode::exact) throw;
    }
  }
  if (!exact_ok) {
    seed = require_seed(rc);
    opt.seed = *seed;
  }
  // u = u' = factor * M, with M the exact or sampled mean of || sum eps X ||
  std::vector<CrucialLemmaParams> probe{{2, 1, 1.0, 1.0}};
  const double M = crucial_lemma_check(fam, probe, opt).front().M;
  std::vector<CrucialLemmaParams> params;
  for (const auto& q : p.at("q"))
    for (const auto& k : p.at("k"))
      for (const auto& f : p.at("u_factors")) {
        const double u = f.get<double>() * (M > 0 ? M : 1.0);
        params.push_back({q.get<int>(), k.get<int>(), u, u});
      }
  const auto res = crucial_lemma_check(fam, params, opt);
  RunOutcome out;
  out.report.name = "crucial_check";
  Table t("crucial_check", {"q", "k", "u", "u_prime", "M", "m_method", "lhs", "lhs_stderr", "order_tail",
                            "tail_method", "rhs", "margin_se", "pass"});
  bool all = true;
  for (const auto& r : res) {
    all = all && r.pass;
    t.add("", seed, method_tag(r.lhs_method),
          {static_cast<std::int64_t>(r.params.q), static_cast<std::int64_t>(r.params.k), r.params.u, r.params.u_prime,
           r.M, method_tag(r.m_method), r.lhs, r.lhs_stderr, r.order_tail, method_tag(r.tail_method), r.rhs,
           r.margin_se, r.pass});
  }
  out.report.tables.push_back(std::move(t));
  out.status = all ? kExitOk : kExitVerification;
  return out;
}

inline RunOutcome run_poisson(const RunConfig& rc) {
  const auto& p = rc.params;
  const OrliczFunction& psi = require_psi(rc);
  const auto ug = p.at("u_grid").is_null() ? default_poisson_u_grid(psi) : parse_grid(p.at("u_grid"), "u_grid");
  const auto sg = parse_grid(p.at("s_grid"), "s_grid");
  const PoissonReport rep = poisson_check(psi, ug, sg, get_size(p, "n"), parse_size_list(p.at("n_sweep"), "n_sweep"));
  const std::string h = spec_hash(psi);
  RunOutcome out;
  out.report.name = "poisson_check";
  Table t("poisson_check", {"s", "u", "n", "log_binomial_tail", "log_poisson_tail", "exponent", "c_needed",
                            "dominates_poisson"});
  for (const auto& c : rep.cells) {
    t.add(h, std::nullopt, "exact",
          {c.s, c.u, static_cast<std::int64_t>(c.n), c.log_binomial_tail, c.log_poisson_tail, c.exponent, c.c_needed,
           c.dominates_poisson});
  }
  Table d("poisson_discrepancy", {"s", "u", "n", "discrepancy"});
  for (const auto& x : rep.discrepancy) {
    for (std::size_t i = 0; i < x.n.size(); ++i) {
      d.add(h, std::nullopt, "exact", {x.s, x.u, static_cast<std::int64_t>(x.n[i]), x.value[i]});
    }
  }
  out.report.meta = {{"c_fitted", meta_number(rep.c_fitted)},
                     {"dominates_poisson", rep.dominates_poisson},
                     {"discrepancy_non_increasing", rep.discrepancy_non_increasing}};
  out.report.tables.push_back(std::move(t));
  out.report.tables.push_back(std::move(d));
  return out;
}

}  // namespace cli

// Dispatches a parsed config. Errors propagate as exceptions.
inline RunOutcome run(const RunConfig& rc) {
  const std::string& c = rc.command;
  if (c == "norm") return cli::run_norm(rc);
  if (c == "check-hj") return cli::run_check_hj(rc);
  if (c == "counterexample") return cli::run_counterexample(rc);
  if (c == "ratio-sweep") return cli::run_ratio_sweep(rc);
  if (c == "series") return cli::run_series(rc);
  if (c == "tails") return cli::run_tails(rc);
  if (c == "calibrate") return cli::run_calibrate(rc);
  if (c == "verify-lemmas") return cli::run_verify_lemmas(rc);
  if (c == "crucial-check") return cli::run_crucial(rc);
  if (c == "poisson-check") return cli::run_poisson(rc);
  throw InvalidParameter("unknown command '" + c + "'");
}

// Runs and writes the report; maps failures to exit codes.
inline int run_and_write(const RunConfig& rc, std::ostream& err, std::vector<std::string>* written = nullptr) {
  try {
    const RunOutcome o = run(rc);
    const auto paths = write_report(o.report, rc.format, rc.out);
    if (written) *written = paths;
    if (o.status == kExitVerification) err << rc.command << ": verification failure (see report)\n";
    return o.status;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << "\n";
    return kExitResource;
  } catch (const RangeError& e) {
    err << "range error: " << e.what() << " (reduce the depth or grid)\n";
    return kExitResource;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace hjorlicz
