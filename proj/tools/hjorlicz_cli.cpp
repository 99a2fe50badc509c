#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <hjorlicz/cli.hpp>

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw hjorlicz::InvalidParameter("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orlicz norms, the (HJ) condition and concentration checks"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string format;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> cases;

  for (const auto& name : hjorlicz::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", seed, "random seed (required for Monte Carlo commands)");
    sub->add_option("--threads", threads, "worker threads (does not change results)")->check(CLI::Range(1u, 1024u));
    if (name == "verify-lemmas") sub->add_option("--cases", cases, "number of random cases");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hjorlicz::kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  hjorlicz::RunConfig rc;
  try {
    rc = hjorlicz::parse_config(config_path.empty() ? "" : read_file(config_path), command);
    if (seed) rc.seed = *seed;
    if (threads) rc.threads = *threads;
    if (!format.empty()) rc.format = format;
    if (!out_dir.empty()) rc.out = out_dir;
    if (cases) {
      if (*cases == 0) throw hjorlicz::InvalidParameter("--cases must be >= 1");
      rc.params["cases"] = *cases;
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return hjorlicz::kExitUsage;
  }

  std::vector<std::string> written;
  const int status = hjorlicz::run_and_write(rc, std::cerr, &written);
  for (const auto& p : written) std::cout << p << "\n";
  return status;
}
