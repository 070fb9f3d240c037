#include <algorithm>
#include <cmath>
#include <limits>

#include "ksjko/error.hpp"
#include "ksjko/jko.hpp"

namespace ksjko {

LinfVerdict linf_monitor(double prev_linf, double new_linf, const JkoConfig& cfg, int dimension) {
  if (!(prev_linf > 0.0)) throw Error(ErrorKind::invalid_argument, "previous L-infinity norm must be positive");
  LinfVerdict v;
  const double rate = cfg.lambda_monitor * cfg.tau * cfg.chi;
  v.inv_prev = 1.0 / prev_linf;
  v.inv_new = new_linf > 0.0 ? 1.0 / new_linf : std::numeric_limits<double>::infinity();
  v.required_inv = v.inv_prev - rate;
  v.required_linf = v.required_inv > 0.0 ? 1.0 / v.required_inv
                                         : std::numeric_limits<double>::infinity();
  v.slack_tol = cfg.monitor_slack_rel * v.inv_prev;
  v.per_step_pass = v.inv_new >= v.required_inv - v.slack_tol;
  const double d = double(dimension);
  v.X = cfg.tau * cfg.chi * new_linf / d;
  v.Y = cfg.tau * cfg.chi * prev_linf / d;
  const double rhs = v.X / std::pow(1.0 + v.X, d);
  v.xy_pass = v.Y >= rhs - cfg.monitor_slack_rel * rhs;
  return v;
}

double energy_dissipation_check(double J_prev, double J_new, double w2_squared, double tau) {
  return J_prev - J_new - w2_squared / tau;
}

KktReport kkt_residual(const DensityField& rho, const DensityField& g, const ScalarField& u,
                       const ScalarField& phi, const JkoConfig& cfg, const Nonlinearity& nl) {
  (void)g;
  const std::size_t n = rho.size();
  const double cap = cfg.cap();
  const double peak = linf_norm(rho).value;
  const double floor = 1e-12 * (std::isfinite(cap) ? cap : peak);
  KktReport k;
  k.h = ScalarField(rho.grid, 0.0);
  k.pressure = ScalarField(rho.grid, 0.0);

  std::vector<double> hv, df, cu, ph;
  std::vector<bool> capped(n, false), used(n, false);
  std::size_t ncapped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(rho[i] > floor)) continue;
    const double fp = f_derivatives(nl, rho[i]).df;
    k.h[i] = fp - cfg.chi * u[i] + phi[i] / cfg.tau;
    used[i] = true;
    capped[i] = std::isfinite(cap) && rho[i] >= cap * (1.0 - 1e-12);
    if (capped[i]) {
      ++ncapped;
      continue;
    }
    hv.push_back(k.h[i]);
    df.push_back(fp);
    cu.push_back(cfg.chi * u[i]);
    ph.push_back(phi[i] / cfg.tau);
  }
  k.active_fraction = double(ncapped) / double(n);
  if (hv.empty()) {
    k.degenerate = true;
    return k;
  }
  std::vector<double> sorted(hv);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  k.c = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

  const auto range = [](const std::vector<double>& v) {
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    return *mx - *mn;
  };
  const double denom = std::max({range(df), range(cu), range(ph)});
  double worst = 0.0;
  for (double x : hv) worst = std::max(worst, std::abs(x - k.c));
  k.residual = denom > 0.0 ? worst / denom : 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    if (!capped[i]) continue;
    const double p = std::max(k.c - k.h[i], 0.0);
    k.pressure[i] = p;
    k.pressure_max = std::max(k.pressure_max, p);
    k.complementarity_defect = std::max(k.complementarity_defect, p * (cap - rho[i]));
  }
  return k;
}

double monge_ampere_residual_1d(const DensityField& rho, const DensityField& g,
                                const TransportResult& res) {
  const Grid& grid = rho.grid;
  const double h = grid.spacing();
  const std::size_t n = rho.size();
  const double lo = g.grid.domain().extent[0].lo;
  const double hg = g.grid.spacing();
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(rho[i - 1] > 0.0 && rho[i] > 0.0 && rho[i + 1] > 0.0)) continue;
    const double tm = transport_map_at(res, grid.center(i - 1, 0));
    const double tp = transport_map_at(res, grid.center(i + 1, 0));
    const double t = transport_map_at(res, grid.center(i, 0));
    // g at T(x_i), linear between cell centers.
    const double s = std::clamp((t - lo) / hg - 0.5, 0.0, double(g.size() - 1));
    const std::size_t j = std::min(std::size_t(s), g.size() - 2);
    const double w = s - double(j);
    const double gt = (1.0 - w) * g[j] + w * g[j + 1];
    const double jac = (tp - tm) / (2.0 * h);
    worst = std::max(worst, std::abs(rho[i] - gt * jac));
  }
  return worst;
}

VelocityField velocity_field(const TransportResult& res, double tau) {
  VelocityField v;
  const Grid& grid = res.source.grid;
  v.dimension = grid.dimension();
  for (int ax = 0; ax < v.dimension; ++ax) {
    v.component[ax] = ScalarField(grid, 0.0);
    for (std::size_t c = 0; c < grid.size(); ++c)
      v.component[ax][c] = (grid.center(c, ax) - res.map_T[ax][c]) / tau;
  }
  return v;
}

double velocity_consistency_1d(const VelocityField& v, const DensityField& rho,
                               const ScalarField& u, double chi, const Nonlinearity& nl,
                               double floor) {
  const double h = rho.grid.spacing();
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < rho.size(); ++i) {
    if (!(rho[i - 1] > floor && rho[i] > floor && rho[i + 1] > floor)) continue;
    const double dfp =
        (f_derivatives(nl, rho[i + 1]).df - f_derivatives(nl, rho[i - 1]).df) / (2.0 * h);
    const double du = (u[i + 1] - u[i - 1]) / (2.0 * h);
    worst = std::max(worst, std::abs(v.component[0][i] - (-dfp + chi * du)));
  }
  return worst;
}

}  // namespace ksjko
