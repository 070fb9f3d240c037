#include <CLI11.hpp>
#include <fmt/format.h>
#include <iostream>

#include "ksjko/commands.hpp"
#include "ksjko/config.hpp"
#include "ksjko/error.hpp"
#include "ksjko/validate.hpp"

using namespace ksjko;

namespace {

int run(const std::string& path) {
  RunConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  }
  const auto out = cmd_run(cfg);
  std::cout << fmt::format("{} steps, exit {}, output in {}\n",
                           out.trajectory.states.empty() ? 0 : out.trajectory.states.size() - 1,
                           out.exit_code, out.directory.string());
  if (!out.message.empty()) std::cerr << out.message << "\n";
  return out.exit_code;
}

int sweep(const std::string& path, const std::string& vary) {
  const auto eq = vary.find('=');
  if (eq == std::string::npos) {
    std::cerr << "config error: --vary expects section.key=v1,v2,...\n";
    return exit_config;
  }
  const std::string key = vary.substr(0, eq);
  std::vector<std::string> values;
  std::string rest = vary.substr(eq + 1);
  for (std::size_t pos = 0; pos <= rest.size();) {
    const auto next = rest.find(',', pos);
    const auto item = rest.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (!item.empty()) values.push_back(item);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  try {
    const RunConfig cfg = load_config(path);
    const int code = cmd_sweep(cfg, key, values);
    std::cout << fmt::format("{} runs, worst exit {}\n", values.size(), code);
    return code;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  }
}

int validate(const std::string& suite) {
  try {
    const auto dir = output_root() / "validate";
    const auto rep = cmd_validate(suite, dir);
    for (const auto& s : rep.suites) {
      std::cout << fmt::format("{:<12} {}  ({:.1f} s)\n", s.name, s.pass ? "PASS" : "FAIL",
                               s.seconds);
      for (const auto& n : s.notes) std::cout << "    " << n << "\n";
      for (const auto& f : s.failures) std::cout << "    failure: " << f << "\n";
    }
    if (rep.calibrated) {
      std::cout << fmt::format("calibration at lambda = {}: c0_empirical = {}\n",
                               rep.calibration.lambda, rep.calibration.c0_empirical);
      for (const auto& r : rep.calibration.rows)
        std::cout << fmt::format("    v = {:<6} pass {}/{}\n", r.v, r.passes, r.runs);
      std::cout << "table written to " << (dir / "calibration.csv").string() << "\n";
    }
    return rep.exit_code;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained minimizing-movement solver for Keller-Segel type flows"};
  app.require_subcommand(1);

  std::string config_path, vary, suite = "all";
  auto* run_cmd = app.add_subcommand("run", "Run one flow from a config file");
  run_cmd->add_option("--config", config_path, "INI config")->required();
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one flow per value of a config key");
  sweep_cmd->add_option("--config", config_path, "INI config")->required();
  sweep_cmd->add_option("--vary", vary, "section.key=v1,v2,...")->required();
  auto* validate_cmd = app.add_subcommand("validate", "Run the validation suites");
  validate_cmd->add_option("--suite", suite,
                           "oracle, poisson, transport, monitor, calibration or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }
  try {
    if (run_cmd->parsed()) return run(config_path);
    if (sweep_cmd->parsed()) return sweep(config_path, vary);
    return validate(suite);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::io ? exit_config : exit_solver;
  }
}
