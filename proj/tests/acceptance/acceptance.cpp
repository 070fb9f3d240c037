#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ksjko/error.hpp"
#include "ksjko/jko.hpp"
#include "ksjko/poisson.hpp"
#include "ksjko/profiles.hpp"
#include "ksjko/reference.hpp"
#include "ksjko/transport.hpp"
#include "ksjko/validate.hpp"

using namespace ksjko;

namespace {

struct Verdict {
  std::string title;
  bool pass = true;
  std::vector<std::string> details;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    details.push_back((ok ? "" : "FAILED: ") + what);
  }
};

std::array<Verdict, 13> verdicts;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

DensityField random_density(const Grid& g, std::mt19937_64& rng, double zero_frac = 0.0) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> v(g.size());
  for (auto& x : v) x = U(rng) < zero_frac ? 0.0 : 0.2 + U(rng);
  if (*std::max_element(v.begin(), v.end()) == 0.0) v[0] = 1.0;
  return normalized(DensityField(g, v));
}

double order(double coarse, double fine) { return std::log2(coarse / fine); }

// Every acceptance run goes through here so that criteria 4 and 11 see it.
Trajectory flow(const std::string& label, const DensityField& rho0, const JkoConfig& cfg,
                const Nonlinearity& nl, bool symmetric) {
  Trajectory tr = run_flow(rho0, cfg, nl);
  auto& c4 = verdicts[4];
  auto& c11 = verdicts[11];
  const double J0 = tr.reports[0].energy.total;
  double worst_slack = INFINITY, sum = 0.0, jmin = J0;
  for (std::size_t k = 1; k < tr.reports.size(); ++k) {
    const auto& r = tr.reports[k];
    worst_slack = std::min(worst_slack, r.dissipation_slack / std::abs(J0));
    sum += r.w2_squared / cfg.tau;
    jmin = std::min(jmin, r.energy.total);
  }
  c4.require(worst_slack >= -1e-6 && sum <= J0 - jmin + 1e-6,
             fmt::format("{}: min slack {:.3e}·|J0|, sum W2/tau {:.6g} <= J0 - min J {:.6g}", label,
                         worst_slack, sum, J0 - jmin));

  double mass = 0.0, asym = 0.0, over = 0.0, neg = 0.0;
  const double cap = cfg.cap();
  for (const auto& s : tr.states) {
    mass = std::max(mass, std::abs(total_mass(s) - 1.0));
    for (double x : s.values) {
      neg = std::min(neg, x);
      over = std::max(over, x - cap);
    }
    if (symmetric) asym = std::max(asym, mirror_asymmetry(s));
  }
  c11.require(mass <= 1e-9 && neg >= 0.0 && over <= 0.0 && asym <= 1e-9,
              fmt::format("{}: mass defect {:.2e}, min value {:.2e}, cap excess {:.2e}{}", label, mass,
                          neg, over, symmetric ? fmt::format(", mirror asymmetry {:.2e}", asym) : ""));
  return tr;
}

void crit_1_and_5() {
  auto& c1 = verdicts[1];
  auto& c5 = verdicts[5];
  Timer timer;
  std::mt19937_64 rng(777);
  const Grid g(DomainSpec::interval(0.0, 1.0), 6);
  double worst = 0.0, worst_kkt = 0.0;
  for (int t = 0; t < 10; ++t) {
    const auto g0 = random_density(g, rng);
    JkoConfig cfg;
    cfg.chi = t % 2 ? 1.0 : 0.0;
    cfg.tau = 0.05;
    const auto nl = Nonlinearity::entropy();
    const auto step = jko_step(g0, cfg, nl);
    const auto bf = brute_force_jko(g0, cfg, nl);
    const double rel = std::abs(step.report.objective - bf.objective) / std::abs(bf.objective);
    worst = std::max(worst, rel);
    worst_kkt = std::max(worst_kkt, step.report.kkt_residual);
    c1.require(rel <= 1e-6, fmt::format("fixture {}: relative objective gap {:.2e}", t, rel));
    c5.require(step.report.kkt_residual <= 1e-3,
               fmt::format("fixture {}: kkt residual {:.2e}", t, step.report.kkt_residual));
  }
  const double secs = timer.seconds();
  c1.require(secs < 60.0, fmt::format("runtime {:.2f} s", secs));
  c1.details.push_back(fmt::format("worst relative gap {:.2e}", worst));
  c5.details.push_back(fmt::format("worst oracle-step kkt residual {:.2e}", worst_kkt));

  // Cap-active fixture: the cap M = 2 sits below the bump's peak of 3.
  const Grid gc(DomainSpec::interval(0.0, 1.0), 40);
  const auto g0 = make_profile("bump:center=0.5,width=0.4,height=3", gc);
  JkoConfig cfg;
  cfg.chi = 10.0;
  cfg.tau = 2.5e-3;
  cfg.cap_M = 2.0;
  const auto step = jko_step(g0, cfg, Nonlinearity::regularized(Nonlinearity::none(), 1e-3));
  c5.require(step.report.active_fraction > 0.0,
             fmt::format("cap-active fixture: active fraction {:.3f}", step.report.active_fraction));
  c5.require(step.report.complementarity_defect <= 1e-8,
             fmt::format("cap-active fixture: complementarity defect {:.2e}",
                         step.report.complementarity_defect));
  c5.require(step.report.kkt_residual <= 1e-3,
             fmt::format("cap-active fixture: kkt residual {:.2e}", step.report.kkt_residual));
}

// Flat-top fixture with ‖ρ₀‖∞ = 2 on [0, 1].
DensityField plateau_fixture() {
  return make_profile("plateau:center=0.5,height=2,ramp=0.1,floor=0.05",
                      Grid(DomainSpec::interval(0.0, 1.0), 200));
}

void crit_2() {
  auto& c = verdicts[2];
  const auto rho0 = plateau_fixture();
  const auto nl = Nonlinearity::regularized(Nonlinearity::none(), 1e-2);
  for (double tau : {2e-3, 1e-3}) {
    JkoConfig cfg;
    cfg.chi = 10.0;
    cfg.tau = tau;
    cfg.lambda_monitor = 1.5;
    cfg.t0 = 0.8 / (cfg.chi * linf_norm(rho0).value);
    cfg.check_hypothesis = false;
    const auto tr = flow(fmt::format("per-step tau={}", tau), rho0, cfg, nl, true);
    c.require(tr.status == FlowStatus::completed,
              fmt::format("tau={}: status {}{}", tau, to_string(tr.status), tr.message.empty() ? "" : ": " + tr.message));
    int fails = 0;
    double worst = 1e300;
    for (std::size_t k = 1; k < tr.reports.size(); ++k) {
      const auto& r = tr.reports[k];
      fails += !r.monitor_pass;
      worst = std::min(worst, (r.inv_linf - r.required_inv_linf_bound) * r.linf);
    }
    c.require(fails == 0 && tr.states.size() == std::size_t(step_count(cfg.t0, tau)) + 1,
              fmt::format("tau={}: {} steps, {} monitor failures, min relative margin {:.3e}",
                          tau, tr.states.size() - 1, fails, worst));
  }
}

void crit_3() {
  auto& c = verdicts[3];
  const auto rho0 = plateau_fixture();
  const auto nl = Nonlinearity::regularized(Nonlinearity::none(), 1e-2);
  for (double tau : {2e-3, 1e-3}) {
    JkoConfig cfg;
    cfg.chi = 10.0;
    cfg.tau = tau;
    cfg.lambda_monitor = 1.5;
    cfg.eps0 = 0.05;
    cfg.t0 = 0.029;
    const auto tr = flow(fmt::format("cumulative tau={}", tau), rho0, cfg, nl, true);
    const int want = step_count(cfg.t0, tau);
    const int got = int(tr.states.size()) - 1;
    double peak = 0.0;
    bool cumulative = true;
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      peak = std::max(peak, linf_norm(tr.states[k]).value);
      cumulative = cumulative && tr.reports[k].cumulative_pass;
    }
    c.require(tr.status == FlowStatus::completed && got == want,
              fmt::format("tau={}: {} steps of {} ({})", tau, got, want, to_string(tr.status)));
    c.require(peak <= 1.0 / cfg.eps0,
              fmt::format("tau={}: max linf {:.4f} vs 1/eps0 = {}", tau, peak, 1.0 / cfg.eps0));
    c.require(cumulative, fmt::format("tau={}: cumulative monitor", tau));
  }
}

void crit_6() {
  auto& c = verdicts[6];
  std::vector<double> res;
  for (int n : {50, 100, 200}) {
    const Grid g(DomainSpec::interval(0.0, 1.0), n);
    const auto rho0 = make_profile("smooth_step:center=0.5,width=0.1,contrast=0.5", g);
    JkoConfig cfg;
    cfg.chi = 1.0;
    cfg.tau = 1e-2;
    const auto step = jko_step(rho0, cfg, Nonlinearity::entropy());
    res.push_back(monge_ampere_residual_1d(step.rho, rho0, step.transport));
  }
  for (std::size_t i = 1; i < res.size(); ++i) {
    const double p = order(res[i - 1], res[i]);
    c.require(p >= 0.8, fmt::format("residual {:.3e} -> {:.3e}, order {:.3f}", res[i - 1], res[i], p));
  }
}

void crit_7() {
  auto& c = verdicts[7];
  // Flat top of height 1 with unit mass needs an interval longer than 1.
  const Grid g(DomainSpec::interval(-1.5, 1.5), 200);
  const auto rho0 = make_profile("plateau:center=0,height=1,ramp=0.4,floor=0.01", g);
  const double m0 = linf_norm(rho0).value;
  JkoConfig cfg;
  cfg.chi = 1.0;
  cfg.tau = 1e-3;
  cfg.t0 = 0.5 / (cfg.chi * m0);
  cfg.check_hypothesis = false;
  const auto tr = flow("blow-up tracking", rho0, cfg, Nonlinearity::regularized(Nonlinearity::none(), 1e-3), true);
  c.require(tr.status == FlowStatus::completed, fmt::format("status {}", to_string(tr.status)));
  double worst = 0.0;
  for (std::size_t k = 1; k < tr.states.size(); ++k) {
    const double inv = 1.0 / linf_norm(tr.states[k]).value;
    const double ref = 1.0 / zero_diffusion_linf(m0, cfg.chi, tr.times[k]);
    worst = std::max(worst, std::abs(inv - ref) / ref);
  }
  c.require(worst <= 0.25, fmt::format("worst relative deviation {:.4f} over {} steps", worst,
                                       tr.states.size() - 1));
}

void crit_8() {
  auto& c = verdicts[8];
  const Grid g(DomainSpec::interval(0.0, 1.0), 200);
  const auto rho0 = make_profile("cosine:amp=0.5", g);
  const auto nl = Nonlinearity::entropy();
  const double horizon = 0.1;
  const auto ref = fv_run(rho0, 1.0, nl, horizon);
  std::vector<double> gaps;
  for (double tau : {4e-3, 2e-3, 1e-3}) {
    JkoConfig cfg;
    cfg.chi = 1.0;
    cfg.tau = tau;
    cfg.t0 = horizon;
    cfg.check_hypothesis = false;
    const auto tr = flow(fmt::format("pde tau={}", tau), rho0, cfg, nl, false);
    c.require(tr.status == FlowStatus::completed && std::abs(tr.times.back() - horizon) < 1e-12,
              fmt::format("tau={}: reached t = {}", tau, tr.times.back()));
    gaps.push_back(compare_l1(tr.states.back(), ref));
  }
  for (std::size_t i = 1; i < gaps.size(); ++i) {
    const double p = order(gaps[i - 1], gaps[i]);
    c.require(p >= 0.8, fmt::format("L1 gap {:.3e} -> {:.3e}, order {:.3f}", gaps[i - 1], gaps[i], p));
  }
  c.require(gaps.back() <= 0.05, fmt::format("terminal gap {:.3e}", gaps.back()));
}

void crit_9() {
  auto& c = verdicts[9];
  // −u″ = 1, u(0) = u(1) = 0: u = x(1−x)/2, compared with exact cell averages.
  std::vector<double> err;
  for (int n : {32, 64, 128}) {
    const Grid g(DomainSpec::interval(0.0, 1.0), n);
    const auto u = solve_potential(DensityField(g, 1.0)).u;
    const double h = g.spacing();
    const auto prim = [](double x) { return x * x / 4 - x * x * x / 6; };
    double e = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double a = g.edge(int(i));
      e = std::max(e, std::abs(u[i] - (prim(a + h) - prim(a)) / h));
    }
    err.push_back(e);
  }
  for (std::size_t i = 1; i < err.size(); ++i)
    c.require(order(err[i - 1], err[i]) >= 1.9,
              fmt::format("dirichlet order {:.3f}", order(err[i - 1], err[i])));

  // Periodic: ρ = 1 + cos(2πx) gives u = cos(2πx)/(4π²).
  err.clear();
  const double tp = 2 * std::numbers::pi;
  for (int n : {32, 64, 128}) {
    const Grid g(DomainSpec::interval(0.0, 1.0, Coupling::periodic), n);
    const double h = g.spacing();
    DensityField rho(g);
    std::vector<double> exact(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double a = g.edge(int(i));
      const double avg_cos = (std::sin(tp * (a + h)) - std::sin(tp * a)) / (tp * h);
      rho[i] = 1.0 + avg_cos;
      exact[i] = avg_cos / (tp * tp);
    }
    const auto u = solve_potential(rho).u;
    double e = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) e = std::max(e, std::abs(u[i] - exact[i]));
    err.push_back(e);
  }
  for (std::size_t i = 1; i < err.size(); ++i)
    c.require(order(err[i - 1], err[i]) >= 1.9,
              fmt::format("periodic order {:.3f}", order(err[i - 1], err[i])));

  std::mt19937_64 rng(909);
  int violations = 0;
  for (int t = 0; t < 100; ++t) {
    const Grid g(t % 2 ? DomainSpec::rectangle({0.0, 1.0}, {0.0, 1.0}) : DomainSpec::interval(0.0, 1.0),
                 4 + int(rng() % 29));
    const auto u = solve_potential(random_density(g, rng, 0.3)).u;
    violations += *std::min_element(u.values.begin(), u.values.end()) < 0.0;
  }
  c.require(violations == 0, fmt::format("maximum principle: {} of 100 densities violate u >= 0", violations));
}

void crit_10() {
  auto& c = verdicts[10];
  std::mt19937_64 rng(1010);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Grid g(DomainSpec::interval(0.0, 1.0), 2 + int(rng() % 40));
    const auto a = random_density(g, rng, 0.3), b = random_density(g, rng, 0.3);
    const double q = w2_quantile_1d(a, b, MeasureModel::atomic).w2_squared;
    worst = std::max(worst, std::abs(q - lp_transport_oracle(a, b).w2_squared));
  }
  c.require(worst <= 1e-10, fmt::format("1D quantile vs LP worst gap {:.2e} on 20 fixtures", worst));

  double worst_ratio = 0.0;
  for (int t = 0; t < 5; ++t) {
    const Grid g(DomainSpec::rectangle({0.0, 1.0}, {0.0, 1.0}), 4);
    std::vector<std::size_t> cells(g.size());
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
    std::uniform_real_distribution<double> U(0.2, 1.2);
    std::array<std::vector<double>, 2> v{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
    for (auto& side : v) {
      std::shuffle(cells.begin(), cells.end(), rng);
      for (int k = 0; k < 8; ++k) side[cells[k]] = U(rng);
    }
    const auto a = normalized(DensityField(g, v[0])), b = normalized(DensityField(g, v[1]));
    const double eps = g.spacing() * g.spacing() / 10;
    const double gap = std::abs(sinkhorn_entropic(a, b, eps).transport_cost - lp_transport_oracle(a, b).w2_squared);
    const double bound = 2 * eps * std::log(8.0);
    worst_ratio = std::max(worst_ratio, gap / bound);
    c.require(gap <= bound, fmt::format("2D fixture {}: sinkhorn gap {:.3e} vs bound {:.3e}", t, gap, bound));
  }
  c.details.push_back(fmt::format("worst sinkhorn gap / bound {:.3f}", worst_ratio));

  // Uniform against all mass in the two central cells: W² = 1/12 − O(h²).
  const Grid g(DomainSpec::interval(0.0, 1.0), 400);
  std::vector<double> block(400, 0.0);
  block[199] = block[200] = 200.0;
  const double w2 = w2_quantile_1d(DensityField(g, 1.0), DensityField(g, block)).w2_squared;
  c.require(std::abs(w2 - 1.0 / 12.0) <= 1e-3, fmt::format("uniform-block W2^2 = {:.8f}", w2));
}

void crit_12() {
  auto& c = verdicts[12];
  Timer timer;
  const auto dir = std::filesystem::temp_directory_path() / "ksjko_acceptance_validate";
  const auto rep = cmd_validate("all", dir);
  const double secs = timer.seconds();
  c.require(rep.calibrated && !rep.calibration.rows.empty(), "calibration table is nonempty");
  c.require(rep.calibration.monotone, "pass rate is monotone in v");
  c.require(rep.calibration.c0_empirical > 0.0,
            fmt::format("c0_empirical = {} at lambda = {}", rep.calibration.c0_empirical, rep.calibration.lambda));
  for (const auto& s : rep.suites) c.require(s.pass, fmt::format("suite {} ({:.2f} s)", s.name, s.seconds));
  c.require(rep.exit_code == 0, fmt::format("validate exit code {}", rep.exit_code));
  c.require(secs < 900.0, fmt::format("validate runtime {:.1f} s", secs));
  std::filesystem::remove_all(dir);
}

template <class F>
void guarded(int id, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    verdicts[id].require(false, fmt::format("exception: {}", e.what()));
  }
}

}  // namespace

int main() {
  const char* titles[] = {"",
                          "oracle equivalence",
                          "per-step L-infinity estimate",
                          "cumulative bound",
                          "energy dissipation",
                          "KKT conditions",
                          "Monge-Ampere identity",
                          "blow-up tracking",
                          "PDE consistency",
                          "Poisson analytics",
                          "transport exactness",
                          "conservation and structure invariants",
                          "calibration"};
  for (int i = 1; i <= 12; ++i) verdicts[i].title = titles[i];

  Timer total;
  guarded(1, crit_1_and_5);
  guarded(2, crit_2);
  guarded(3, crit_3);
  guarded(6, crit_6);
  guarded(7, crit_7);
  guarded(8, crit_8);
  guarded(9, crit_9);
  guarded(10, crit_10);
  guarded(12, crit_12);

  int failed = 0;
  for (int i = 1; i <= 12; ++i) {
    const auto& v = verdicts[i];
    failed += !v.pass;
    std::printf("%s %2d %s\n", v.pass ? "PASS" : "FAIL", i, v.title.c_str());
    for (const auto& d : v.details) std::printf("        %s\n", d.c_str());
  }
  std::printf("%d of 12 criteria passed in %.1f s\n", 12 - failed, total.seconds());
  return failed == 0 ? 0 : 1;
}
