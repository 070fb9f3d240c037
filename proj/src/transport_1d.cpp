#include "ksjko/transport.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "ksjko/detail/cumulative.hpp"
#include "ksjko/error.hpp"

namespace ksjko {

const char* to_string(TransportMethod m) {
  switch (m) {
    case TransportMethod::quantile: return "quantile";
    case TransportMethod::entropic: return "entropic";
    case TransportMethod::lp: return "lp";
  }
  return "?";
}

namespace {

void check_1d_pair(const DensityField& rho, const DensityField& g, double mass_tol) {
  if (rho.grid.dimension() != 1 || g.grid.dimension() != 1)
    throw Error(ErrorKind::invalid_argument, "quantile transport needs 1D fields");
  const double gap = std::abs(total_mass(rho) - total_mass(g));
  if (gap > mass_tol)
    throw Error(ErrorKind::marginal, fmt::format("mass mismatch {:.3e}", gap), gap);
}

void fill_phi_piecewise(TransportResult& res) {
  const Grid& grid = res.source.grid;
  const double h = grid.spacing();
  std::vector<double> integral(grid.size(), 0.0);
  double phi = 0.0;
  for (const auto& s : res.segments) {
    const double len = s.x1 - s.x0;
    const double d0 = s.x0 - s.t0;
    const double d1 = s.x1 - s.t1;
    integral[s.source_cell] += len * phi + len * len * (d0 / 2.0 + (d1 - d0) / 6.0);
    phi += len * (d0 + d1) / 2.0;
  }
  for (double& v : integral) v /= h;
  res.phi = ScalarField(grid, std::move(integral));
}

void fill_phi_atomic(TransportResult& res) {
  const Grid& grid = res.source.grid;
  const double lo = grid.domain().extent[0].lo;
  std::vector<double> phi(grid.size(), 0.0);
  double prev_x = lo, prev_d = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.center(i, 0);
    const double d = x - res.map_T[0][i];
    acc += (x - prev_x) * (i == 0 ? d : (prev_d + d) / 2.0);
    phi[i] = acc;
    prev_x = x;
    prev_d = d;
  }
  res.phi = ScalarField(grid, std::move(phi));
}

}  // namespace

TransportResult w2_quantile_1d(const DensityField& rho, const DensityField& g, MeasureModel model,
                               double mass_tol) {
  check_1d_pair(rho, g, mass_tol);
  const double ta = total_mass(rho), tb = total_mass(g);
  if (ta <= 0.0) throw Error(ErrorKind::marginal, "empty source measure");
  const auto A = detail::CumulativeMass::from_masses(rho.masses());
  const auto B = detail::CumulativeMass::from_masses(g.masses(), A.total / tb);

  TransportResult res;
  res.method = TransportMethod::quantile;
  res.model = model;
  res.source = rho;
  res.target = g;
  const std::size_t n = rho.size();
  const double h = rho.grid.spacing(), hg = g.grid.spacing();
  res.map_T[0].assign(n, 0.0);
  std::vector<double> moment(n, 0.0);
  double w2 = 0.0;
  detail::for_each_piece(A, B, [&](std::size_t i, std::size_t j, double u0, double u1, double v0,
                                   double v1, double dm) {
    const double xl = rho.grid.edge(int(i)), yl = g.grid.edge(int(j));
    if (dm <= 0.0) {
      const double t = model == MeasureModel::piecewise_constant ? yl + v0 * hg
                                                                 : rho.grid.center(i, 0);
      res.map_T[0][i] = t;
      if (model == MeasureModel::piecewise_constant)
        res.segments.push_back({xl, xl + h, t, t, 0.0, i, j});
      return;
    }
    if (model == MeasureModel::piecewise_constant) {
      const double x0 = xl + u0 * h, x1 = xl + u1 * h;
      if (x1 <= x0) return;  // rounding sliver
      const double t0 = yl + v0 * hg, t1 = yl + v1 * hg;
      const double d0 = x0 - t0, d1 = x1 - t1;
      w2 += dm * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
      moment[i] += dm * (t0 + t1) / 2.0;
      res.segments.push_back({x0, x1, t0, t1, dm, i, j});
    } else {
      const double d = rho.grid.center(i, 0) - g.grid.center(j, 0);
      w2 += dm * d * d;
      moment[i] += dm * g.grid.center(j, 0);
    }
    res.plan.push_back({i, j, dm});
  });
  for (std::size_t i = 0; i < n; ++i) {
    const double a = A.cell(i);
    if (a > 0.0) res.map_T[0][i] = moment[i] / a;
  }
  res.w2_squared = w2;
  res.transport_cost = w2;
  if (model == MeasureModel::piecewise_constant) fill_phi_piecewise(res);
  else fill_phi_atomic(res);
  return res;
}

double transport_map_at(const TransportResult& res, double x) {
  if (res.segments.empty())
    throw Error(ErrorKind::invalid_argument, "map evaluation needs a 1D piecewise-constant result");
  const auto& segs = res.segments;
  auto it = std::upper_bound(segs.begin(), segs.end(), x,
                             [](double v, const MapSegment& s) { return v < s.x0; });
  if (it == segs.begin()) return segs.front().t0;
  const auto& s = *(it - 1);
  if (x >= s.x1) return s.t1;
  return s.t0 + (s.t1 - s.t0) * (x - s.x0) / (s.x1 - s.x0);
}

ScalarField kantorovich_potential_1d(const TransportResult& res) {
  if (res.method != TransportMethod::quantile)
    throw Error(ErrorKind::invalid_argument, "kantorovich_potential_1d needs a quantile result");
  return res.phi;
}

}  // namespace ksjko
