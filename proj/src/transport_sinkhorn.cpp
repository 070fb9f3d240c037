#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "ksjko/error.hpp"
#include "ksjko/transport.hpp"

namespace ksjko {

namespace {

struct Support {
  std::vector<std::size_t> cells;
  std::vector<double> mass;
  std::vector<std::array<double, 2>> x;
};

Support support_of(const DensityField& rho, double scale) {
  Support s;
  const auto m = rho.masses();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] <= 0.0) continue;
    s.cells.push_back(i);
    s.mass.push_back(m[i] * scale);
    auto c = rho.grid.center(i);
    if (rho.grid.dimension() == 1) c[1] = 0.0;
    s.x.push_back(c);
  }
  return s;
}

double log_sum_exp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

struct EntropicSolution {
  std::vector<double> f, g, plan;  // plan is |a| x |b| row-major
  double value = 0.0;              // ⟨C,π⟩ + ε KL(π | a⊗b) at the dual optimum
  double gap = 0.0;
  int iterations = 0;
};

EntropicSolution solve_entropic(const Support& a, const Support& b, double eps,
                                const SinkhornOptions& opts) {
  const std::size_t n = a.mass.size(), m = b.mass.size();
  std::vector<double> C(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double dx = a.x[i][0] - b.x[j][0], dy = a.x[i][1] - b.x[j][1];
      C[i * m + j] = dx * dx + dy * dy;
    }
  std::vector<double> loga(n), logb(m);
  for (std::size_t i = 0; i < n; ++i) loga[i] = std::log(a.mass[i]);
  for (std::size_t j = 0; j < m; ++j) logb[j] = std::log(b.mass[j]);

  EntropicSolution s;
  s.f.assign(n, 0.0);
  s.g.assign(m, 0.0);
  std::vector<double> buf;
  const auto row_gap = [&]() {
    double gap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      buf.assign(m, 0.0);
      for (std::size_t j = 0; j < m; ++j) buf[j] = (s.g[j] - C[i * m + j]) / eps + logb[j];
      const double row = std::exp(s.f[i] / eps + log_sum_exp(buf) + loga[i]);
      gap += std::abs(row - a.mass[i]);
    }
    return gap;
  };
  for (s.iterations = 0; s.iterations < opts.max_iters; ++s.iterations) {
    for (std::size_t i = 0; i < n; ++i) {
      buf.assign(m, 0.0);
      for (std::size_t j = 0; j < m; ++j) buf[j] = (s.g[j] - C[i * m + j]) / eps + logb[j];
      s.f[i] = -eps * log_sum_exp(buf);
    }
    for (std::size_t j = 0; j < m; ++j) {
      buf.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) buf[i] = (s.f[i] - C[i * m + j]) / eps + loga[i];
      s.g[j] = -eps * log_sum_exp(buf);
    }
    if (s.iterations % 10 == 0 || s.iterations + 1 == opts.max_iters) {
      s.gap = row_gap();
      if (s.gap <= opts.marginal_tol) break;
    }
  }
  if (s.gap > opts.marginal_tol)
    throw Error(ErrorKind::convergence,
                fmt::format("sinkhorn marginal gap {:.3e} after {} iterations", s.gap,
                            s.iterations),
                s.gap);

  s.plan.assign(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      s.plan[i * m + j] = std::exp((s.f[i] + s.g[j] - C[i * m + j]) / eps + loga[i] + logb[j]);

  // Round onto the exact marginals: shrink rows and columns, then add the
  // rank-one correction of the remaining defects.
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < m; ++j) r += s.plan[i * m + j];
    if (r > a.mass[i])
      for (std::size_t j = 0; j < m; ++j) s.plan[i * m + j] *= a.mass[i] / r;
  }
  for (std::size_t j = 0; j < m; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += s.plan[i * m + j];
    if (c > b.mass[j])
      for (std::size_t i = 0; i < n; ++i) s.plan[i * m + j] *= b.mass[j] / c;
  }
  std::vector<double> er(n), ec(m);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < m; ++j) r += s.plan[i * m + j];
    er[i] = std::max(0.0, a.mass[i] - r);
    total += er[i];
  }
  for (std::size_t j = 0; j < m; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += s.plan[i * m + j];
    ec[j] = std::max(0.0, b.mass[j] - c);
  }
  if (total > 0.0)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) s.plan[i * m + j] += er[i] * ec[j] / total;

  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) value += s.f[i] * a.mass[i];
  for (std::size_t j = 0; j < m; ++j) value += s.g[j] * b.mass[j];
  s.value = value;
  return s;
}

// Self transport a → a with the averaged symmetric update f ← (f + T(f))/2.
// Returns the dual value 2⟨f, a⟩.
double solve_symmetric(const Support& a, double eps, const SinkhornOptions& opts) {
  const std::size_t n = a.mass.size();
  std::vector<double> loga(n), f(n, 0.0), t(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) loga[i] = std::log(a.mass[i]);
  const auto cost = [&](std::size_t i, std::size_t j) {
    const double dx = a.x[i][0] - a.x[j][0], dy = a.x[i][1] - a.x[j][1];
    return dx * dx + dy * dy;
  };
  double gap = 0.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) buf[j] = (f[j] - cost(i, j)) / eps + loga[j];
      t[i] = -eps * log_sum_exp(buf);
    }
    gap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      gap += a.mass[i] * std::abs(std::expm1((f[i] - t[i]) / eps));
      f[i] = 0.5 * (f[i] + t[i]);
    }
    if (gap <= opts.marginal_tol) break;
  }
  if (gap > opts.marginal_tol)
    throw Error(ErrorKind::convergence, fmt::format("symmetric sinkhorn gap {:.3e}", gap), gap);
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) value += 2.0 * f[i] * a.mass[i];
  return value;
}

}  // namespace

TransportResult sinkhorn_entropic(const DensityField& rho, const DensityField& g, double eps,
                                  const SinkhornOptions& opts) {
  if (!(eps > 0.0)) throw Error(ErrorKind::parameter, "entropic epsilon must be positive");
  if (rho.grid.dimension() != g.grid.dimension())
    throw Error(ErrorKind::invalid_argument, "sinkhorn needs fields of equal dimension");
  const double ta = total_mass(rho), tb = total_mass(g);
  if (std::abs(ta - tb) > 1e-9)
    throw Error(ErrorKind::marginal, fmt::format("mass mismatch {:.3e}", ta - tb), ta - tb);
  const Support a = support_of(rho, 1.0), b = support_of(g, ta / tb);
  const auto sol = solve_entropic(a, b, eps, opts);

  TransportResult res;
  res.method = TransportMethod::entropic;
  res.model = MeasureModel::atomic;
  res.epsilon = eps;
  res.source = rho;
  res.target = g;
  res.iterations = sol.iterations;
  const std::size_t n = a.mass.size(), m = b.mass.size();
  const int d = rho.grid.dimension();
  for (int ax = 0; ax < d; ++ax) {
    res.map_T[ax].assign(rho.size(), 0.0);
    for (std::size_t c = 0; c < rho.size(); ++c) res.map_T[ax][c] = rho.grid.center(c, ax);
  }
  double cost = 0.0, defect = 0.0;
  std::vector<double> col(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 2> moment{0.0, 0.0};
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double p = sol.plan[i * m + j];
      const double dx = a.x[i][0] - b.x[j][0], dy = a.x[i][1] - b.x[j][1];
      cost += p * (dx * dx + dy * dy);
      moment[0] += p * b.x[j][0];
      moment[1] += p * b.x[j][1];
      row += p;
      col[j] += p;
      res.plan.push_back({a.cells[i], b.cells[j], p});
    }
    defect = std::max(defect, std::abs(row - a.mass[i]));
    for (int ax = 0; ax < d; ++ax) res.map_T[ax][a.cells[i]] = moment[ax] / a.mass[i];
  }
  for (std::size_t j = 0; j < m; ++j) defect = std::max(defect, std::abs(col[j] - b.mass[j]));
  res.marginal_defect = defect;
  res.transport_cost = cost;
  res.w2_squared = sol.value;
  if (opts.debias) {
    const double saa = solve_symmetric(a, eps, opts);
    const double sbb = solve_symmetric(b, eps, opts);
    res.w2_squared = std::max(0.0, sol.value - 0.5 * saa - 0.5 * sbb);
  }

  std::vector<double> phi(rho.size(), 0.0);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += sol.f[i] / 2.0;
  mean /= double(std::max<std::size_t>(n, 1));
  for (std::size_t i = 0; i < n; ++i) phi[a.cells[i]] = sol.f[i] / 2.0 - mean;
  res.phi = ScalarField(rho.grid, std::move(phi));
  return res;
}

}  // namespace ksjko
