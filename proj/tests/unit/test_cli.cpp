#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ksjko/commands.hpp"
#include "ksjko/config.hpp"
#include "ksjko/error.hpp"

using namespace ksjko;
namespace fs = std::filesystem;

namespace {

const char* kHeat = R"(
[domain]
n = 50
[physics]
chi = 0
initial = bump:center=0.5,width=0.4,height=2
[scheme]
tau = 1e-3
t0 = 0.01
[output]
directory = heat
stride = 5
)";

// Cosine profile with its maximum on a Dirichlet wall and almost no
// diffusion: the first step breaks the λ = 1.1 per-step bound.
const char* kWallMax = R"(
[domain]
n = 100
[physics]
chi = 10
nonlinearity = regularized:base=none,delta=0.001
initial = cosine:amp=0.5
[scheme]
tau = 6.666666666666667e-4
t0 = 2e-3
lambda = 1.1
[output]
directory = wall
stride = 1
)";

struct TempRoot {
  fs::path dir;
  TempRoot() {
    dir = fs::temp_directory_path() / ("ksjko_cli_" + std::to_string(std::rand()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    setenv("KSJKO_OUTPUT_ROOT", dir.c_str(), 1);
  }
  ~TempRoot() {
    unsetenv("KSJKO_OUTPUT_ROOT");
    fs::remove_all(dir);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
    return e.what();
  }
  FAIL("expected a configuration error");
  return {};
}

}  // namespace

TEST_CASE("config round-trips through its canonical form") {
  const auto cfg = parse_config(kWallMax);
  const auto text = serialize_config(cfg);
  CHECK(serialize_config(parse_config(text)) == text);
  const auto back = parse_config(text);
  CHECK(back.scheme.tau == cfg.scheme.tau);
  CHECK(back.scheme.lambda_monitor == 1.1);
  CHECK(back.nonlinearity == cfg.nonlinearity);
  CHECK(back.output.stride == 1);
}

TEST_CASE("config errors name the offending key") {
  std::string bad = kHeat;
  bad.replace(bad.find("chi = 0"), 7, "chii = 0");
  CHECK(config_error(bad).find("chii") != std::string::npos);

  std::string missing = kHeat;
  missing.replace(missing.find("tau = 1e-3"), 10, "");
  CHECK(config_error(missing).find("scheme.tau") != std::string::npos);

  std::string malformed = kHeat;
  malformed.replace(malformed.find("n = 50"), 6, "n = fifty");
  CHECK(config_error(malformed).find("domain.n") != std::string::npos);

  std::string dup = kHeat;
  dup.replace(dup.find("chi = 0"), 7, "chi = 0\nchi = 1");
  CHECK(config_error(dup).find("chi") != std::string::npos);

  // ‖ρ₀‖∞ = 1.5, so the start needs χλt₀ < 2/3 − 0.05; χλt₀ = 1.1 fails.
  std::string late = kWallMax;
  late.replace(late.find("t0 = 2e-3"), 9, "t0 = 0.1");
  const auto msg = config_error(late);
  CHECK(msg.find("scheme.t0") != std::string::npos);
}

TEST_CASE("sweep values are applied through the setter table") {
  auto cfg = parse_config(kHeat);
  set_config_value(cfg, "scheme.tau", "2e-3");
  CHECK(cfg.scheme.tau == 2e-3);
  set_config_value(cfg, "physics.nonlinearity", "power:m=2");
  CHECK(cfg.parsed_nonlinearity().kind() == Nonlinearity::Kind::power);
  CHECK_THROWS_AS(set_config_value(cfg, "scheme.nope", "1"), Error);
}

TEST_CASE("run writes series, snapshots and summary") {
  TempRoot root;
  const auto cfg = parse_config(kHeat);
  const auto out = cmd_run(cfg);
  CHECK(out.exit_code == exit_ok);
  const fs::path dir = root.dir / "heat";
  CHECK(out.directory == dir);
  CHECK(count_lines(dir / "series.csv") == 12);  // header + steps 0..10
  int snapshots = 0;
  for (const auto& e : fs::directory_iterator(dir))
    snapshots += e.path().filename().string().starts_with("snapshot_");
  CHECK(snapshots == 3);  // k = 0, 5, 10
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "config.ini"));
  CHECK(serialize_config(load_config((dir / "config.ini").string())) == serialize_config(cfg));

  const auto snap = read_snapshot_csv(dir / snapshot_name(10, "csv"), cfg.grid());
  const auto& last = out.trajectory.states.back();
  for (std::size_t i = 0; i < last.size(); ++i) CHECK(snap.rho[i] == last[i]);

  // Byte-identical rerun; the summary differs only in its wall time.
  const auto without_wall_time = [](std::string text) {
    const auto at = text.find("\"wall_time_s\"");
    if (at != std::string::npos) text.erase(at, text.find('\n', at) - at);
    return text;
  };
  const auto series = slurp(dir / "series.csv");
  const auto snapshot = slurp(dir / snapshot_name(10, "csv"));
  const auto summary = without_wall_time(slurp(dir / "summary.json"));
  cmd_run(cfg);
  CHECK(slurp(dir / "series.csv") == series);
  CHECK(slurp(dir / snapshot_name(10, "csv")) == snapshot);
  CHECK(without_wall_time(slurp(dir / "summary.json")) == summary);
}

TEST_CASE("monitor violation gives exit status 1 and names the step") {
  TempRoot root;
  const auto cfg = parse_config(kWallMax);
  const auto out = cmd_run(cfg);
  CHECK(out.exit_code == exit_monitor);
  bool found = false;
  for (const auto& m : out.monitors)
    if (m.name == "linf_per_step") {
      found = true;
      CHECK(!m.pass);
      CHECK(m.first_failure == 1);
    }
  CHECK(found);
  CHECK(out.message.find("step 1") != std::string::npos);
  CHECK(fs::exists(root.dir / "wall" / "summary.json"));
}

TEST_CASE("empty trajectory gives a header-only series") {
  TempRoot root;
  write_series(Trajectory{}, root.dir / "empty.csv");
  CHECK(count_lines(root.dir / "empty.csv") == 1);
}

TEST_CASE("snapshot names") {
  CHECK(snapshot_name(5, "csv") == "snapshot_k000005.csv");
  CHECK(snapshot_name(123456, "json") == "snapshot_k123456.json");
}
