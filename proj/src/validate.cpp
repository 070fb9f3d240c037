#include "ksjko/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "ksjko/commands.hpp"
#include "ksjko/error.hpp"
#include "ksjko/jko.hpp"
#include "ksjko/poisson.hpp"
#include "ksjko/profiles.hpp"
#include "ksjko/reference.hpp"
#include "ksjko/transport.hpp"

namespace ksjko {

namespace fs = std::filesystem;

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

SuiteResult named(const std::string& name) {
  SuiteResult s;
  s.name = name;
  return s;
}

void expect(SuiteResult& s, bool ok, const std::string& what) {
  if (!ok) {
    s.pass = false;
    s.failures.push_back(what);
  }
}

DensityField random_density(const Grid& g, std::mt19937_64& rng, double zero_prob) {
  std::uniform_real_distribution<double> U(0.1, 2.0), coin(0.0, 1.0);
  std::vector<double> v(g.size());
  for (auto& x : v) x = coin(rng) < zero_prob ? 0.0 : U(rng);
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
  return normalized(DensityField(g, std::move(v)));
}

double observed_order(double coarse, double fine) { return std::log2(coarse / fine); }

}  // namespace

SuiteResult suite_oracle() {
  SuiteResult s = named("oracle");
  Timer timer;
  std::mt19937_64 rng(20240611);
  const Grid g(DomainSpec::interval(0.0, 1.0), 6);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const DensityField g0 = random_density(g, rng, 0.0);
    JkoConfig cfg;
    cfg.chi = t % 2 == 0 ? 0.0 : 1.0;
    cfg.tau = 0.05;
    const auto nl = Nonlinearity::entropy();
    try {
      const auto step = jko_step(g0, cfg, nl);
      const auto bf = brute_force_jko(g0, cfg, nl);
      const double rel =
          std::abs(step.report.objective - bf.objective) / std::max(std::abs(bf.objective), 1e-300);
      worst = std::max(worst, rel);
      expect(s, rel <= 1e-6, fmt::format("fixture {}: objective gap {:.3e}", t, rel));
      expect(s, step.report.kkt_residual <= 1e-3,
             fmt::format("fixture {}: kkt residual {:.3e}", t, step.report.kkt_residual));
    } catch (const Error& e) {
      expect(s, false, fmt::format("fixture {}: {}", t, e.what()));
    }
  }
  s.notes.push_back(fmt::format("worst relative objective gap {:.3e}", worst));
  s.seconds = timer.seconds();
  return s;
}

SuiteResult suite_poisson() {
  SuiteResult s = named("poisson");
  Timer timer;
  // −u″ = 1 on (0,1), u = 0 at the walls: cell values against cell averages
  // of x(1−x)/2.
  std::vector<double> err;
  for (int n : {32, 64, 128}) {
    const Grid g(DomainSpec::interval(0.0, 1.0), n);
    const auto u = solve_potential(DensityField(g, 1.0)).u;
    const double h = g.spacing();
    double e = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double a = g.edge(int(i)), b = a + h;
      const auto F = [](double x) { return x * x / 4.0 - x * x * x / 6.0; };
      e = std::max(e, std::abs(u[i] - (F(b) - F(a)) / h));
    }
    err.push_back(e);
  }
  for (std::size_t i = 1; i < err.size(); ++i) {
    const double p = observed_order(err[i - 1], err[i]);
    expect(s, p >= 1.9, fmt::format("dirichlet order {:.3f}", p));
  }
  s.notes.push_back(fmt::format("dirichlet errors {:.3e} {:.3e} {:.3e}", err[0], err[1], err[2]));

  // Periodic: −u″ = a cos(2πx) has u = a cos(2πx)/(4π²).
  err.clear();
  const double amp = 0.5, k = 2.0 * std::numbers::pi;
  for (int n : {32, 64, 128}) {
    const Grid g(DomainSpec::interval(0.0, 1.0, Coupling::periodic), n);
    const double h = g.spacing();
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double a = g.edge(int(i));
      v[i] = 1.0 + amp * (std::sin(k * (a + h)) - std::sin(k * a)) / (k * h);
    }
    const auto u = solve_potential(DensityField(g, std::move(v))).u;
    double e = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double a = g.edge(int(i));
      const double avg = amp * (std::sin(k * (a + h)) - std::sin(k * a)) / (k * h) / (k * k);
      e = std::max(e, std::abs(u[i] - avg));
    }
    err.push_back(e);
  }
  for (std::size_t i = 1; i < err.size(); ++i) {
    const double p = observed_order(err[i - 1], err[i]);
    expect(s, p >= 1.9, fmt::format("periodic order {:.3f}", p));
  }
  s.notes.push_back(fmt::format("periodic errors {:.3e} {:.3e} {:.3e}", err[0], err[1], err[2]));

  // Maximum principle on random densities, half 1D and half 2D.
  std::mt19937_64 rng(99);
  int violations = 0;
  for (int t = 0; t < 100; ++t) {
    const Grid g = t % 2 == 0 ? Grid(DomainSpec::interval(0.0, 1.0), 40)
                              : Grid(DomainSpec::rectangle({0.0, 1.0}, {0.0, 1.0}), 12);
    const auto u = solve_potential(random_density(g, rng, 0.3)).u;
    if (*std::min_element(u.values.begin(), u.values.end()) < 0.0) ++violations;
  }
  expect(s, violations == 0, fmt::format("maximum principle violated on {} densities", violations));
  s.seconds = timer.seconds();
  return s;
}

SuiteResult suite_transport() {
  SuiteResult s = named("transport");
  Timer timer;
  std::mt19937_64 rng(4242);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int n = 4 + int(rng() % 60);
    const Grid g(DomainSpec::interval(-1.0, 2.0), n);
    const auto a = random_density(g, rng, t % 3 == 0 ? 0.3 : 0.0);
    const auto b = random_density(g, rng, t % 4 == 0 ? 0.3 : 0.0);
    const double q = w2_quantile_1d(a, b, MeasureModel::atomic).w2_squared;
    const double lp = lp_transport_oracle(a, b).w2_squared;
    worst = std::max(worst, std::abs(q - lp));
    expect(s, std::abs(q - lp) <= 1e-10,
           fmt::format("1D fixture {} (n = {}): quantile {} vs lp {}", t, n, q, lp));
  }
  s.notes.push_back(fmt::format("worst quantile-lp gap {:.3e}", worst));

  const Grid g2(DomainSpec::rectangle({0.0, 1.0}, {0.0, 1.0}), 4);
  const double eps = g2.spacing() * g2.spacing() / 10.0;
  for (int t = 0; t < 5; ++t) {
    std::vector<std::size_t> idx(g2.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<double> va(g2.size(), 0.0), vb(g2.size(), 0.0);
    std::uniform_real_distribution<double> U(0.2, 1.0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < 8; ++i) va[idx[i]] = U(rng);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < 8; ++i) vb[idx[i]] = U(rng);
    const auto a = normalized(DensityField(g2, va)), b = normalized(DensityField(g2, vb));
    const double lp = lp_transport_oracle(a, b).w2_squared;
    const double sk = sinkhorn_entropic(a, b, eps).w2_squared;
    const double bound = 2.0 * eps * std::log(8.0);
    expect(s, std::abs(sk - lp) <= bound,
           fmt::format("2D fixture {}: sinkhorn {} vs lp {} (bound {})", t, sk, lp, bound));
  }

  // Uniform density against the two central cells: 1/12 − (2h)²/12.
  const Grid g4(DomainSpec::interval(0.0, 1.0), 400);
  std::vector<double> block(g4.size(), 0.0);
  block[199] = block[200] = 1.0;
  const double w = w2_quantile_1d(DensityField(g4, 1.0), normalized(DensityField(g4, block)))
                       .w2_squared;
  expect(s, std::abs(w - 1.0 / 12.0) <= 1e-3, fmt::format("uniform-block W2^2 = {}", w));
  s.notes.push_back(fmt::format("uniform-block W2^2 = {:.12f}", w));
  s.seconds = timer.seconds();
  return s;
}

SuiteResult suite_monitor() {
  SuiteResult s = named("monitor");
  Timer timer;
  const Grid g(DomainSpec::interval(0.0, 1.0), 100);
  const auto rho0 = make_profile("plateau:center=0.5,height=2,ramp=0.1,floor=0.05", g);
  JkoConfig cfg;
  cfg.chi = 10.0;
  cfg.tau = 2e-3;
  cfg.t0 = 0.02;
  cfg.lambda_monitor = 1.5;
  cfg.check_hypothesis = false;
  try {
    const auto traj = run_flow(rho0, cfg, Nonlinearity::parse("regularized:base=none,delta=1e-2"));
    expect(s, traj.status == FlowStatus::completed, "flow stopped: " + traj.message);
    for (const auto& m : evaluate_monitors(traj, cfg))
      expect(s, m.pass, fmt::format("{} monitor failed at step {}", m.name, m.first_failure));
  } catch (const Error& e) {
    expect(s, false, e.what());
  }
  s.seconds = timer.seconds();
  return s;
}

std::vector<double> default_calibration_grid() {
  return {0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45};
}

CalibrationTable calibration_sweep(const std::vector<double>& v_grid, double lambda) {
  const Grid g(DomainSpec::interval(0.0, 1.0), 100);
  // Interior maxima only: the monitor argument needs the maximizer away from
  // the wall.
  const std::vector<std::string> profiles = {
      "bump:center=0.5,width=0.3,height=2",
      "plateau:center=0.5,height=2,ramp=0.1,floor=0.05",
      "two_bumps:c1=0.3,c2=0.7,width=0.2,height=2",
      "bump:center=0.4,width=0.5,height=1.5,floor=0.3",
  };
  const std::vector<std::string> nonlinearities = {"entropy", "regularized:base=none,delta=1e-3"};
  const double chi = 10.0;
  CalibrationTable table;
  table.lambda = lambda;
  for (double v : v_grid) {
    CalibrationRow row;
    row.v = v;
    row.worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& p : profiles) {
      const auto rho0 = make_profile(p, g);
      const double linf = linf_norm(rho0).value;
      for (const auto& nls : nonlinearities) {
        JkoConfig cfg;
        cfg.chi = chi;
        cfg.tau = v / (chi * linf);
        cfg.lambda_monitor = lambda;
        ++row.runs;
        try {
          const auto step = jko_step(rho0, cfg, Nonlinearity::parse(nls));
          const auto verdict = linf_monitor(linf, step.report.linf, cfg, 1);
          row.worst_margin = std::min(row.worst_margin, verdict.inv_new - verdict.required_inv);
          if (verdict.per_step_pass) ++row.passes;
        } catch (const Error&) {
          row.worst_margin = -std::numeric_limits<double>::infinity();
        }
      }
    }
    table.rows.push_back(row);
  }
  bool prefix = true;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    if (i > 0 && r.pass_rate() > table.rows[i - 1].pass_rate()) table.monotone = false;
    if (prefix && r.passes == r.runs) table.c0_empirical = r.v;
    else prefix = false;
  }
  return table;
}

void write_calibration_csv(const CalibrationTable& table, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, fmt::format("cannot write '{}'", path.string()));
  out << "v,lambda,runs,passes,pass_rate,worst_margin,c0_empirical\n";
  for (const auto& r : table.rows)
    out << fmt::format("{:.17g},{:.17g},{},{},{:.17g},{:.17g},{:.17g}\n", r.v, table.lambda,
                       r.runs, r.passes, r.pass_rate(), r.worst_margin, table.c0_empirical);
  if (!out) throw Error(ErrorKind::io, fmt::format("write to '{}' failed", path.string()));
}

ValidateReport cmd_validate(const std::string& suite, const fs::path& directory) {
  static const std::vector<std::string> names = {"oracle", "poisson", "transport", "monitor",
                                                 "calibration"};
  if (suite != "all" && std::find(names.begin(), names.end(), suite) == names.end())
    throw Error(ErrorKind::configuration, fmt::format("suite: unknown suite '{}'", suite));
  const auto wanted = [&](const std::string& n) { return suite == "all" || suite == n; };
  ValidateReport rep;
  if (wanted("oracle")) rep.suites.push_back(suite_oracle());
  if (wanted("poisson")) rep.suites.push_back(suite_poisson());
  if (wanted("transport")) rep.suites.push_back(suite_transport());
  if (wanted("monitor")) rep.suites.push_back(suite_monitor());
  if (wanted("calibration")) {
    SuiteResult s = named("calibration");
    Timer timer;
    rep.calibration = calibration_sweep(default_calibration_grid());
    rep.calibrated = true;
    fs::create_directories(directory);
    write_calibration_csv(rep.calibration, directory / "calibration.csv");
    expect(s, !rep.calibration.rows.empty(), "empty calibration table");
    expect(s, rep.calibration.monotone, "pass rate is not monotone in v");
    expect(s, rep.calibration.c0_empirical > 0.0, "no passing v in the grid");
    s.notes.push_back(fmt::format("c0_empirical = {} at lambda = {}", rep.calibration.c0_empirical,
                                  rep.calibration.lambda));
    s.seconds = timer.seconds();
    rep.suites.push_back(s);
  }
  for (const auto& s : rep.suites)
    if (!s.pass) rep.exit_code = 1;
  return rep;
}

}  // namespace ksjko
