#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ksjko/error.hpp"
#include "ksjko/jko.hpp"
#include "ksjko/profiles.hpp"
#include "ksjko/reference.hpp"

using namespace ksjko;

namespace {

DensityField random_density(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.3, 1.7);
  std::vector<double> v(g.size());
  for (auto& x : v) x = U(rng);
  return normalized(DensityField(g, v));
}

}  // namespace

TEST_CASE("3-cell step matches a grid search of the objective") {
  // Oracle: scan the 2-simplex of masses, then refine around the best point.
  const Grid g(DomainSpec::interval(0.0, 1.0), 3);
  std::mt19937_64 rng(31);
  for (int t = 0; t < 4; ++t) {
    const auto g0 = random_density(g, rng);
    JkoConfig cfg;
    cfg.chi = t % 2 ? 1.0 : 0.0;
    cfg.tau = 0.05;
    const auto nl = t < 2 ? Nonlinearity::entropy() : Nonlinearity::power(2.0);
    const double h = g.spacing();
    const auto obj = [&](double m0, double m1) {
      const double m2 = 1.0 - m0 - m1;
      if (m0 < 0 || m1 < 0 || m2 < 0) return 1e300;
      return jko_objective_1d(DensityField(g, {m0 / h, m1 / h, m2 / h}), g0, cfg, nl);
    };
    double b0 = 1.0 / 3, b1 = 1.0 / 3, best = obj(b0, b1), span = 0.5;
    for (int level = 0; level < 30; ++level, span *= 0.5) {
      const double c0 = b0, c1 = b1;
      for (int i = -8; i <= 8; ++i)
        for (int j = -8; j <= 8; ++j) {
          const double m0 = c0 + span * i / 8, m1 = c1 + span * j / 8, v = obj(m0, m1);
          if (v < best) best = v, b0 = m0, b1 = m1;
        }
    }
    const auto step = jko_step(g0, cfg, nl);
    CHECK(step.report.objective <= best + 1e-10 * std::abs(best));
    CHECK(step.report.objective == doctest::Approx(best).epsilon(1e-8));
    CHECK(step.rho[0] * h == doctest::Approx(b0).epsilon(1e-5));
    CHECK(step.rho[1] * h == doctest::Approx(b1).epsilon(1e-5));
  }
}

TEST_CASE("step output is a local minimizer under mass-preserving moves") {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 12; ++t) {
    const Grid g(DomainSpec::interval(0.0, 1.0), 5 + int(rng() % 20));
    const auto g0 = random_density(g, rng);
    JkoConfig cfg;
    cfg.chi = double(t % 3);
    cfg.tau = 0.01;
    const auto nl = t % 2 ? Nonlinearity::entropy() : Nonlinearity::power(1.5);
    const auto step = jko_step(g0, cfg, nl);
    const double j0 = jko_objective_1d(step.rho, g0, cfg, nl);
    CHECK(j0 == doctest::Approx(step.report.objective).epsilon(1e-12));
    CHECK(j0 <= jko_objective_1d(g0, g0, cfg, nl) + 1e-12);
    const double h = g.spacing();
    for (int k = 0; k < 20; ++k) {
      const std::size_t i = rng() % g.size(), j = rng() % g.size();
      if (i == j) continue;
      const double mu = 1e-4 * std::min(step.rho[i], step.rho[j]) * h;
      for (double s : {mu, -mu}) {
        DensityField p = step.rho;
        p[i] += s / h;
        p[j] -= s / h;
        if (p[i] < 0 || p[j] < 0 || p[i] > cfg.cap() || p[j] > cfg.cap()) continue;
        CHECK(jko_objective_1d(p, g0, cfg, nl) >= j0 - 1e-13 * std::abs(j0));
      }
    }
  }
}

TEST_CASE("step invariants: mass, bounds, symmetry") {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 10; ++t) {
    const int d = 1 + t % 2;
    const Grid g(d == 1 ? DomainSpec::interval(0.0, 1.0)
                        : DomainSpec::rectangle({0.0, 1.0}, {0.0, 1.0}),
                 d == 1 ? 30 : 8);
    auto v = random_density(g, rng).values;
    for (std::size_t c = 0; c < g.size(); ++c) v[c] = v[g.mirror(c)] = std::max(v[c], v[g.mirror(c)]);
    const auto g0 = normalized(DensityField(g, v));
    JkoConfig cfg;
    cfg.chi = 2.0;
    cfg.tau = 5e-3;
    const auto step = jko_step(g0, cfg, Nonlinearity::entropy());
    CHECK(std::abs(total_mass(step.rho) - 1.0) <= 1e-9);
    for (double x : step.rho.values) {
      CHECK(x >= 0.0);
      CHECK(x <= cfg.cap() * (1 + 1e-12));
    }
    CHECK(mirror_asymmetry(step.rho) <= 1e-6 * linf_norm(step.rho).value);
    CHECK(step.report.kkt_residual <= 1e-3);
  }
}

TEST_CASE("cap-active step satisfies complementarity") {
  const Grid g(DomainSpec::interval(0.0, 1.0), 40);
  const auto g0 = make_profile("bump:center=0.5,width=0.4,height=3", g);
  JkoConfig cfg;
  cfg.chi = 10.0;
  cfg.tau = 2.5e-3;
  cfg.cap_M = 2.0;
  const auto step = jko_step(g0, cfg, Nonlinearity::regularized(Nonlinearity::none(), 1e-3));
  CHECK(step.report.active_fraction > 0.1);
  CHECK(step.report.pressure_max > 0.0);
  CHECK(step.report.complementarity_defect <= 1e-8);
  CHECK(step.report.kkt_residual <= 1e-3);
  CHECK(linf_norm(step.rho).value <= 2.0 * (1 + 1e-12));
}

TEST_CASE("linf monitor arithmetic") {
  JkoConfig cfg;
  cfg.chi = 2.0;
  cfg.tau = 0.01;
  cfg.lambda_monitor = 1.5;
  // ‖g‖⁻¹ = 0.5, required 0.5 − 1.5·0.01·2 = 0.47.
  const auto ok = linf_monitor(2.0, 1.0 / 0.48, cfg, 1);
  CHECK(ok.required_inv == doctest::Approx(0.47));
  CHECK(ok.required_linf == doctest::Approx(1.0 / 0.47));
  CHECK(ok.per_step_pass);
  const auto bad = linf_monitor(2.0, 1.0 / 0.46, cfg, 1);
  CHECK(!bad.per_step_pass);
  // Within the relative slack 1e−3·‖g‖⁻¹.
  CHECK(linf_monitor(2.0, 1.0 / (0.47 - 0.0004), cfg, 1).per_step_pass);
  CHECK(energy_dissipation_check(3.0, 1.0, 0.01, 0.01) == doctest::Approx(1.0));
}

TEST_CASE("step counts and the start hypothesis") {
  CHECK(step_count(0.3, 0.1) == 3);
  CHECK(step_count(0.029, 1e-3) == 29);
  CHECK(step_count(0.0295, 1e-3) == 29);
  JkoConfig cfg;
  cfg.chi = 10.0;
  cfg.lambda_monitor = 1.1;
  cfg.eps0 = 0.05;
  cfg.t0 = 0.029;
  CHECK_NOTHROW(check_start_hypothesis(cfg, 2.0));  // 0.319 < 0.45
  cfg.t0 = 0.05;
  try {
    check_start_hypothesis(cfg, 2.0);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
  }
  JkoConfig bad;
  bad.tau = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("flow: energy decreases and the action identity holds") {
  const Grid g(DomainSpec::interval(0.0, 1.0), 50);
  const auto rho0 = make_profile("bump:center=0.4,width=0.4,height=2,floor=0.2", g);
  JkoConfig cfg;
  cfg.chi = 1.0;
  cfg.tau = 2e-3;
  cfg.t0 = 0.02;
  const auto traj = run_flow(rho0, cfg, Nonlinearity::entropy());
  REQUIRE(traj.status == FlowStatus::completed);
  REQUIRE(traj.states.size() == 11);
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    CHECK(traj.reports[k].energy.total <= traj.reports[k - 1].energy.total + 1e-12);
    CHECK(traj.reports[k].dissipation_slack_half >= -1e-12);
    CHECK(std::abs(total_mass(traj.states[k]) - 1.0) <= 1e-9);
    CHECK(traj.times[k] == doctest::Approx(k * cfg.tau));
  }
  // Constant-speed geodesics: ∫|ρ̂′|² over a step is W²/τ.
  CHECK(metric_action(traj) == doctest::Approx(dissipation_sum(traj)).epsilon(1e-10));
  const auto at = trajectory_interpolate(traj, 3 * cfg.tau);
  CHECK(compare_l1(at.piecewise, traj.states[3]) < 1e-12);
  CHECK(compare_l1(at.geodesic, traj.states[3]) < 1e-10);
  const auto mid = trajectory_interpolate(traj, 3.5 * cfg.tau);
  CHECK(std::abs(total_mass(mid.geodesic) - 1.0) <= 1e-12);
}

TEST_CASE("heat flow tracks the explicit finite-volume reference") {
  const Grid g(DomainSpec::interval(0.0, 1.0), 50);
  const auto rho0 = make_profile("bump:center=0.5,width=0.4,height=2,floor=0.1", g);
  JkoConfig cfg;
  cfg.chi = 0.0;
  cfg.tau = 1e-3;
  cfg.t0 = 0.01;
  const auto nl = Nonlinearity::entropy();
  const auto traj = run_flow(rho0, cfg, nl);
  REQUIRE(traj.status == FlowStatus::completed);
  const auto fv = fv_run(rho0, 0.0, nl, cfg.t0);
  // The scheme is first order in τ: τ = 1e−3 keeps the L¹ gap near 1e−3.
  CHECK(compare_l1(traj.states.back(), fv) < 5e-3);
}

TEST_CASE("2D step conserves mass and keeps the square's symmetry") {
  const Grid g(DomainSpec::rectangle({0.0, 1.0}, {0.0, 1.0}), 10);
  const auto g0 = make_profile("bump:center=0.5,width=0.6,height=2,floor=0.2", g);
  JkoConfig cfg;
  cfg.chi = 1.0;
  cfg.tau = 5e-3;
  const auto step = jko_step(g0, cfg, Nonlinearity::entropy());
  CHECK(std::abs(total_mass(step.rho) - 1.0) <= 1e-9);
  CHECK(mirror_asymmetry(step.rho, 0) <= 1e-6);
  CHECK(mirror_asymmetry(step.rho, 1) <= 1e-6);
  for (double x : step.rho.values) CHECK(x >= 0.0);
}
