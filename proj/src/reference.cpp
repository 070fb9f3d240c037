#include "ksjko/reference.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <random>

#include "ksjko/error.hpp"
#include "ksjko/poisson.hpp"

namespace ksjko {

namespace {

double max_drift(const Grid& g, const ScalarField& u, double chi) {
  const int n = g.cells_per_axis();
  const bool periodic = g.domain().coupling == Coupling::periodic;
  double w = 0.0;
  for (std::size_t c = 0; c < g.size(); ++c) {
    const auto ij = g.multi_index(c);
    for (int a = 0; a < g.dimension(); ++a) {
      auto nb = ij;
      nb[a] += 1;
      if (nb[a] >= n) {
        if (!periodic) continue;
        nb[a] = 0;
      }
      w = std::max(w, std::abs(chi * (u[g.flat_index(nb[0], nb[1])] - u[c]) / g.spacing(a)));
    }
  }
  return w;
}

}  // namespace

double fv_stable_dt(const DensityField& rho, double chi, const Nonlinearity& nl) {
  const Grid& g = rho.grid;
  const double h = g.spacing();
  double dpsi = 0.0;
  for (double v : rho.values) dpsi = std::max(dpsi, psi_prime(nl, v));
  double dt = dpsi > 0.0 ? h * h / (2.0 * g.dimension() * dpsi) : 1e300;
  if (chi != 0.0) {
    const double w = max_drift(g, solve_potential(rho).u, chi);
    if (w > 0.0) dt = std::min(dt, h / (2.0 * w));
  }
  return dt;
}

DensityField fv_explicit_step(const DensityField& rho, const FvConfig& cfg, double chi,
                              const Nonlinearity& nl) {
  const Grid& g = rho.grid;
  const double limit = cfg.cfl_safety * fv_stable_dt(rho, chi, nl);
  if (cfg.dt > limit * (1.0 + 1e-12))
    throw Error(ErrorKind::parameter,
                fmt::format("time step {} exceeds the CFL limit {}", cfg.dt, limit));
  const ScalarField u = chi != 0.0 ? solve_potential(rho).u : ScalarField(g, 0.0);
  const int n = g.cells_per_axis();
  const bool periodic = g.domain().coupling == Coupling::periodic;
  std::vector<double> psi(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) psi[c] = psi_eval(nl, rho[c]);
  std::vector<double> out(rho.values);
  for (std::size_t c = 0; c < g.size(); ++c) {
    const auto ij = g.multi_index(c);
    for (int a = 0; a < g.dimension(); ++a) {
      auto nb = ij;
      nb[a] += 1;
      if (nb[a] >= n) {
        if (!periodic) continue;
        nb[a] = 0;
      }
      const std::size_t d = g.flat_index(nb[0], nb[1]);
      const double h = g.spacing(a);
      const double w = chi * (u[d] - u[c]) / h;
      const double flux = (w > 0.0 ? w * rho[c] : w * rho[d]) - (psi[d] - psi[c]) / h;
      out[c] -= cfg.dt * flux / h;
      out[d] += cfg.dt * flux / h;
    }
  }
  return DensityField(g, std::move(out));
}

DensityField fv_run(const DensityField& rho0, double chi, const Nonlinearity& nl, double horizon,
                    double cfl_safety, double max_dt) {
  DensityField rho = rho0;
  double t = 0.0;
  while (t < horizon * (1.0 - 1e-14)) {
    FvConfig cfg;
    cfg.cfl_safety = 1.0;
    cfg.dt = std::min({cfl_safety * fv_stable_dt(rho, chi, nl), max_dt, horizon - t});
    rho = fv_explicit_step(rho, cfg, chi, nl);
    t += cfg.dt;
  }
  return rho;
}

double zero_diffusion_linf(double m0, double chi, double t) {
  const double s = chi * m0 * t;
  if (s >= 1.0)
    throw Error(ErrorKind::domain,
                fmt::format("t = {} is at or past the blow-up time {}", t, 1.0 / (chi * m0)));
  return m0 / (1.0 - s);
}

namespace {

using Point = std::array<double, 2>;

// Integral over a convex polygon of max(L, 0) with L affine.
double positive_part_integral(std::vector<Point> poly, double c0, double cx, double cy) {
  const auto L = [&](const Point& p) { return c0 + cx * p[0] + cy * p[1]; };
  std::vector<Point> clipped;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point& p = poly[k];
    const Point& q = poly[(k + 1) % poly.size()];
    const double lp = L(p), lq = L(q);
    if (lp >= 0.0) clipped.push_back(p);
    if ((lp >= 0.0) != (lq >= 0.0)) {
      const double s = lp / (lp - lq);
      clipped.push_back({p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])});
    }
  }
  if (clipped.size() < 3) return 0.0;
  double area2 = 0.0, gx = 0.0, gy = 0.0;
  for (std::size_t k = 0; k < clipped.size(); ++k) {
    const Point& p = clipped[k];
    const Point& q = clipped[(k + 1) % clipped.size()];
    const double cr = p[0] * q[1] - q[0] * p[1];
    area2 += cr;
    gx += (p[0] + q[0]) * cr;
    gy += (p[1] + q[1]) * cr;
  }
  if (area2 == 0.0) return 0.0;
  const double area = 0.5 * area2;
  const Point centroid{gx / (3.0 * area2), gy / (3.0 * area2)};
  return std::abs(area) * L(centroid);
}

}  // namespace

double w2_cdf_double_integral(const DensityField& a, const DensityField& b) {
  if (a.grid.dimension() != 1 || !a.grid.same_as(b.grid))
    throw Error(ErrorKind::invalid_argument, "double-integral W2 needs two fields on one 1D grid");
  const std::size_t n = a.size();
  const double h = a.grid.spacing();
  std::vector<double> F(n + 1, 0.0), G(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    F[i + 1] = F[i] + a[i] * h;
    G[i + 1] = G[i] + b[i] * h;
  }
  double total = 0.0;
  for (std::size_t I = 0; I < n; ++I) {
    const double x0 = a.grid.edge(int(I)), x1 = x0 + h;
    for (std::size_t J = I; J < n; ++J) {
      const double y0 = a.grid.edge(int(J)), y1 = y0 + h;
      std::vector<Point> poly;
      if (J == I) poly = {{x0, y0}, {x1, y1}, {x0, y1}};  // x < y half of the square
      else poly = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
      // F(x) = F_I + a_I (x − x0), G(y) = G_J + b_J (y − y0).
      total += positive_part_integral(poly, F[I] - a[I] * x0 - (G[J] - b[J] * y0), a[I], -b[J]);
      total += positive_part_integral(poly, G[I] - b[I] * x0 - (F[J] - a[J] * y0), b[I], -a[J]);
    }
  }
  return 2.0 * total;
}

namespace {

// Projection of masses onto {Σm = total, 0 ≤ m ≤ cap} by bisection on a shift.
std::vector<double> project_capped_simplex(const std::vector<double>& y, double total, double cap) {
  const auto mass_at = [&](double s) {
    double m = 0.0;
    for (double v : y) m += std::clamp(v - s, 0.0, cap);
    return m;
  };
  double lo = *std::min_element(y.begin(), y.end()) - total - 1.0;
  double hi = *std::max_element(y.begin(), y.end()) + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass_at(mid) > total ? lo : hi) = mid;
  }
  const double s = 0.5 * (lo + hi);
  std::vector<double> m(y.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    m[i] = std::clamp(y[i] - s, 0.0, cap);
    sum += m[i];
  }
  // Remove the bisection residue on cells strictly inside the box.
  double room = 0.0;
  for (double v : m) if (v > 0.0 && v < cap) room += v;
  if (room > 0.0)
    for (double& v : m) if (v > 0.0 && v < cap) v *= 1.0 + (total - sum) / room;
  return m;
}

}  // namespace

BruteForceResult brute_force_jko(const DensityField& g, const JkoConfig& cfg,
                                 const Nonlinearity& nl, int starts, std::uint64_t seed) {
  const Grid& grid = g.grid;
  if (grid.dimension() != 1 || grid.size() > 16)
    throw Error(ErrorKind::size, fmt::format("brute-force oracle takes 1D grids of at most 16 "
                                             "cells (got {})", grid.size()));
  const std::size_t n = grid.size();
  const double h = grid.spacing();
  const double cap_mass = std::isfinite(cfg.cap()) ? cfg.cap() * h : 1e300;
  BruteForceResult out;

  const auto objective = [&](const std::vector<double>& m) {
    ++out.evaluations;
    DensityField rho(grid);
    for (std::size_t i = 0; i < n; ++i) rho[i] = m[i] / h;
    return total_energy(rho, nl, cfg.chi).total + w2_cdf_double_integral(rho, g) / (2.0 * cfg.tau);
  };
  const auto gradient = [&](const std::vector<double>& m) {
    std::vector<double> grad(n);
    std::vector<double> p(m);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = 1e-6 * std::max(m[i], 1e-3);
      if (m[i] > d) {
        p[i] = m[i] + d;
        const double fp = objective(p);
        p[i] = m[i] - d;
        const double fm = objective(p);
        grad[i] = (fp - fm) / (2.0 * d);
      } else {
        p[i] = m[i] + d;
        const double fp = objective(p);
        p[i] = m[i] + 2.0 * d;
        const double fpp = objective(p);
        grad[i] = (4.0 * fp - fpp - 3.0 * objective(m)) / (2.0 * d);
      }
      p[i] = m[i];
    }
    return grad;
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_m;
  for (int s = 0; s < starts; ++s) {
    std::vector<double> m = g.masses();
    if (s > 0)
      for (double& v : m) v = unif(rng);
    m = project_capped_simplex(m, 1.0, cap_mass);
    double f = objective(m);
    auto grad = gradient(m);
    double alpha = 1e-3;
    std::vector<double> history{f};
    for (int it = 0; it < 4000; ++it) {
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = m[i] - alpha * grad[i];
      auto p = project_capped_simplex(y, 1.0, cap_mass);
      std::vector<double> d(n);
      double dmax = 0.0, slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d[i] = p[i] - m[i];
        dmax = std::max(dmax, std::abs(d[i]));
        slope += d[i] * grad[i];
      }
      if (dmax < 1e-12) break;
      const double ref = *std::max_element(history.end() - std::min<std::ptrdiff_t>(10, history.size()),
                                           history.end());
      double step = 1.0, fn = 0.0;
      std::vector<double> trial(n);
      for (int ls = 0; ls < 50; ++ls) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = std::max(m[i] + step * d[i], 0.0);
        fn = objective(trial);
        if (fn <= ref + 1e-4 * step * slope) break;
        step *= 0.5;
      }
      const auto gn = gradient(trial);
      double ss = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double si = trial[i] - m[i], yi = gn[i] - grad[i];
        ss += si * si;
        sy += si * yi;
      }
      alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e6) : 1e-3;
      m = trial;
      f = fn;
      grad = gn;
      history.push_back(f);
    }
    if (f < best) {
      best = f;
      best_m = m;
    }
  }
  DensityField rho(grid);
  for (std::size_t i = 0; i < n; ++i) rho[i] = best_m[i] / h;
  out.rho = std::move(rho);
  out.objective = best;
  return out;
}

double compare_l1(const DensityField& a, const DensityField& b) {
  if (!a.grid.same_as(b.grid)) throw Error(ErrorKind::invalid_argument, "compare_l1 needs one grid");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s * a.grid.cell_volume();
}

}  // namespace ksjko
