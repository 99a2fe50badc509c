#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <hjorlicz/cli.hpp>

using namespace hjorlicz;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hjorlicz_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HJ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

}  // namespace

TEST(Config, DefaultsPerCommand) {
  for (const auto& c : command_names()) {
    const auto rc = parse_config("", c);
    EXPECT_EQ(rc.command, c);
    EXPECT_EQ(rc.threads, 1u);
    EXPECT_EQ(rc.format, "csv");
    EXPECT_FALSE(rc.seed);
    EXPECT_EQ(rc.params.at("budget").get<std::size_t>(), kDefaultAtomBudget);
  }
  const auto cx = parse_config("", "counterexample");
  ASSERT_TRUE(cx.phi);
  EXPECT_EQ(cx.params.at("n_max").get<int>(), 4);
  EXPECT_EQ(parse_config("", "verify-lemmas").params.at("cases").get<int>(), 1000);
  EXPECT_EQ(parse_config(R"({"command": "tails", "seed": 5, "threads": 3})", "").seed, 5u);
  const auto cc = parse_config(
      R"({"psi": {"family": "exp_power", "alpha": 1}, "family": {"kind": "three_point", "u": 2, "n": 4}})",
      "crucial-check");
  EXPECT_EQ(parse_family(cc.params.at("family"), &*cc.psi).size(), 4u);
}

TEST(Config, RejectsInvalidInput) {
  EXPECT_THROW(parse_config(R"({"psi": {"family": "exp_power", "alpha": 1.5}})", "check-hj"), InvalidParameter);
  EXPECT_THROW(parse_config(R"({"seed": 1, "seed": 2})", "tails"), InvalidParameter);
  EXPECT_THROW(parse_config(R"({"bogus": 1})", "tails"), InvalidParameter);
  EXPECT_THROW(parse_config(R"({"command": "series"})", "tails"), InvalidParameter);
  EXPECT_THROW(parse_config("", "nope"), InvalidParameter);
  EXPECT_THROW(parse_config(R"({"threads": 0})", "tails"), InvalidParameter);
  EXPECT_THROW(parse_config(R"({"format": "xml"})", "tails"), InvalidParameter);
  EXPECT_THROW(parse_config(R"({"c": -1})", "tails"), InvalidParameter);
  EXPECT_THROW(parse_config(R"({"seed": -3})", "tails"), InvalidParameter);
  EXPECT_THROW(parse_config("[1, 2]", "tails"), InvalidParameter);
}

TEST(Config, Grids) {
  const auto g = parse_grid(json::parse(R"({"lo": 2, "hi": 200, "points": 3})"), "g");
  ASSERT_EQ(g.size(), 3u);
  EXPECT_NEAR(g[1], 20.0, 1e-12);
  EXPECT_EQ(parse_grid(json::parse("[1, 2.5]"), "g"), (std::vector<double>{1.0, 2.5}));
  EXPECT_THROW(parse_grid(json::parse(R"({"lo": 2, "hi": 1, "points": 3})"), "g"), InvalidParameter);
  EXPECT_THROW(parse_grid(json::parse("[]"), "g"), InvalidParameter);
  EXPECT_THROW(parse_grid(json::parse(R"({"lo": 1, "hi": 2, "points": 3, "x": 1})"), "g"), InvalidParameter);
}

TEST(Run, NormOfPointMass) {
  const auto rc = parse_config(
      R"({"psi": {"family": "exp_power", "alpha": 1}, "distribution": {"values": [1], "probs": [1]}})", "norm");
  const auto o = run(rc);
  ASSERT_EQ(o.report.tables.size(), 1u);
  const auto& row = o.report.tables[0].rows.at(0);
  EXPECT_NEAR(std::get<double>(row.at(6)), 1.0 / std::numbers::ln2, 1e-9);
  EXPECT_EQ(std::get<std::string>(row.at(0)), kToolVersion);
  EXPECT_EQ(std::get<std::string>(row.at(3)), "exact");
}

TEST(Run, MonteCarloNeedsSeed) {
  std::ostringstream err;
  const auto rc = parse_config("", "verify-lemmas");
  EXPECT_EQ(run_and_write(rc, err), kExitUsage);
  EXPECT_NE(err.str().find("seed"), std::string::npos);
}

TEST(Run, OutputIsIndependentOfThreads) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"tails", R"({"psi": {"family": "exp_power", "alpha": 1}, "samples": 4000, "seed": 11,
                    "process": {"kind": "rademacher_projection", "d": 3, "n": 8}})"},
      {"ratio-sweep", R"({"psi": {"family": "exp_power", "alpha": 1}, "mode": "monte-carlo", "samples": 2000,
                          "seed": 12, "u_grid": [2, 3], "n_grid": [2, 8]})"},
      {"verify-lemmas", R"({"cases": 30, "seed": 13})"},
      {"crucial-check", R"({"family": {"kind": "rademacher", "n": 16}, "mode": "monte-carlo", "samples": 2000,
                            "seed": 14, "q": [2], "k": [1, 2], "u_factors": [1.0]})"}};
  for (const auto& [cmd, text] : cases) {
    for (const std::string fmt : {"csv", "json"}) {
      std::vector<std::string> out1, out4;
      auto rc = parse_config(text, cmd);
      rc.format = fmt;
      rc.out = scratch_dir(cmd + "_1").string();
      rc.threads = 1;
      std::ostringstream err;
      ASSERT_EQ(run_and_write(rc, err, &out1), kExitOk) << cmd << ": " << err.str();
      rc.out = scratch_dir(cmd + "_4").string();
      rc.threads = 4;
      ASSERT_EQ(run_and_write(rc, err, &out4), kExitOk) << cmd << ": " << err.str();
      ASSERT_EQ(out1.size(), out4.size());
      for (std::size_t i = 0; i < out1.size(); ++i) {
        EXPECT_EQ(fs::path(out1[i]).filename(), fs::path(out4[i]).filename());
        EXPECT_EQ(slurp(out1[i]), slurp(out4[i])) << out1[i];
      }
    }
  }
}

TEST(Run, CsvRowsCarryProvenanceColumns) {
  auto rc = parse_config(R"({"psi": {"family": "power_law", "p": 2}, "s_grid": [2, 4], "u_grid": [2, 4]})", "check-hj");
  rc.out = scratch_dir("csv").string();
  std::ostringstream err;
  std::vector<std::string> paths;
  ASSERT_EQ(run_and_write(rc, err, &paths), kExitOk) << err.str();
  ASSERT_FALSE(paths.empty());
  const std::string text = slurp(paths.front());
  EXPECT_EQ(text.rfind("tool_version,psi_hash,seed,method,", 0), 0u) << text;
  EXPECT_NE(text.find(spec_hash(*rc.psi)), std::string::npos);
}

TEST(Run, QuantileTableForPowerLaw) {
  auto rc = parse_config(R"({"psi": {"family": "power_law", "p": 2}, "u_grid": [2, 3], "n_grid": [2, 8],
                             "quantile": true})",
                         "ratio-sweep");
  const auto o = run(rc);
  ASSERT_EQ(o.report.tables.size(), 2u);
  EXPECT_EQ(o.report.tables[1].name, "quantile_ratio");
  EXPECT_EQ(o.report.tables[1].rows.size(), 4u);
  auto bad = parse_config(R"({"psi": {"family": "exp_power", "alpha": 1}, "quantile": true})", "ratio-sweep");
  std::ostringstream err;
  bad.out = scratch_dir("quantile").string();
  EXPECT_EQ(run_and_write(bad, err), kExitUsage);
}

TEST(Report, FormatDouble) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(kInf), "inf");
  EXPECT_EQ(format_double(-kInf), "-inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  Table t("x", {"a"});
  EXPECT_THROW(t.add("h", std::nullopt, "exact", {}), InvalidParameter);
  t.add("h", std::nullopt, "exact", {std::string("p,q")});
  EXPECT_NE(to_csv(t).find("\"p,q\""), std::string::npos);
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch_dir("bin");
  const std::string out = " --out " + dir.string();
  write_text(dir / "sq.json", R"({"psi": {"family": "exp_square"}})");
  EXPECT_EQ(run_cli("check-hj --config " + (dir / "sq.json").string() + out), kExitOk);
  EXPECT_EQ(run_cli("check-hj" + out), kExitUsage);
  EXPECT_EQ(run_cli("verify-lemmas --cases 5 --seed 3" + out), kExitOk);
  EXPECT_EQ(run_cli("verify-lemmas --cases 5" + out), kExitUsage);
  EXPECT_EQ(run_cli("no-such-command"), kExitUsage);
  EXPECT_EQ(run_cli("tails --threads 0" + out), kExitUsage);
  write_text(dir / "bad.json", R"({"psi": {"family": "exp_power", "alpha": 1.5}})");
  EXPECT_EQ(run_cli("check-hj --config " + (dir / "bad.json").string() + out), kExitUsage);
  write_text(dir / "dup.json", R"({"seed": 1, "seed": 1})");
  EXPECT_EQ(run_cli("tails --config " + (dir / "dup.json").string() + out), kExitUsage);
  write_text(dir / "big.json",
             R"({"psi": {"family": "exp_power", "alpha": 1}, "family": {"kind": "iid", "n": 40,
                 "distribution": {"values": [0, 1, 3.14159, 2.71828], "probs": [0.1, 0.2, 0.3, 0.4]}},
                 "budget": 1000})");
  EXPECT_EQ(run_cli("norm --config " + (dir / "big.json").string() + out), kExitResource);
  EXPECT_TRUE(fs::exists(dir / "check_hj.csv"));
  EXPECT_EQ(run_cli("counterexample --format json" + out), kExitOk);
  EXPECT_TRUE(fs::exists(dir / "counterexample.json"));
}
