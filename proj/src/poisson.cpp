#include "ksjko/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fftw3.h>
#include <fmt/format.h>
#include <numbers>

#include "ksjko/detail/tridiagonal.hpp"
#include "ksjko/error.hpp"

namespace ksjko {

namespace {

bool has_dirichlet_walls(Coupling c) { return c == Coupling::dirichlet; }
bool is_periodic(Coupling c) { return c == Coupling::periodic; }

std::vector<double> right_hand_side(const DensityField& rho) {
  const auto& dom = rho.grid.domain();
  std::vector<double> rhs = rho.values;
  if (dom.coupling == Coupling::neumann_shifted || dom.coupling == Coupling::periodic) {
    const double c = 1.0 / dom.volume();
    for (double& v : rhs) v -= c;
  }
  return rhs;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
  return r;
}

void remove_mean(std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= double(v.size());
  for (double& x : v) x -= m;
}

// Diagonal of the stencil operator, for the Jacobi preconditioner.
std::vector<double> stencil_diagonal(const Grid& g) {
  const auto c = g.domain().coupling;
  const int n = g.cells_per_axis();
  std::vector<double> diag(g.size(), c == Coupling::neumann_helmholtz ? 1.0 : 0.0);
  for (std::size_t cell = 0; cell < g.size(); ++cell) {
    const auto ij = g.multi_index(cell);
    for (int a = 0; a < g.dimension(); ++a) {
      const double ih2 = 1.0 / (g.spacing(a) * g.spacing(a));
      for (int side : {-1, 1}) {
        const int k = ij[a] + side;
        if ((k >= 0 && k < n) || is_periodic(c)) diag[cell] += ih2;
        else if (has_dirichlet_walls(c)) diag[cell] += 2.0 * ih2;
      }
    }
  }
  return diag;
}

std::vector<double> apply_stencil(const Grid& g, const std::vector<double>& u) {
  const auto c = g.domain().coupling;
  const int n = g.cells_per_axis();
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t cell = 0; cell < g.size(); ++cell) {
    const auto ij = g.multi_index(cell);
    double acc = c == Coupling::neumann_helmholtz ? u[cell] : 0.0;
    for (int a = 0; a < g.dimension(); ++a) {
      const double ih2 = 1.0 / (g.spacing(a) * g.spacing(a));
      for (int side : {-1, 1}) {
        auto nb = ij;
        nb[a] += side;
        if (nb[a] >= 0 && nb[a] < n) {
          acc += (u[cell] - u[g.flat_index(nb[0], nb[1])]) * ih2;
        } else if (is_periodic(c)) {
          nb[a] = (nb[a] + n) % n;
          acc += (u[cell] - u[g.flat_index(nb[0], nb[1])]) * ih2;
        } else if (has_dirichlet_walls(c)) {
          acc += 2.0 * u[cell] * ih2;
        }
      }
    }
    out[cell] = acc;
  }
  return out;
}

std::vector<double> solve_1d_tridiagonal(const Grid& g, const std::vector<double>& rhs) {
  const auto c = g.domain().coupling;
  const int n = g.cells_per_axis();
  const double ih2 = 1.0 / (g.spacing() * g.spacing());
  std::vector<double> sub(n, -ih2), sup(n, -ih2), diag(n, 2.0 * ih2);
  if (c == Coupling::dirichlet) {
    diag[0] = diag[n - 1] = 3.0 * ih2;
  } else {  // Helmholtz with zero-flux walls
    diag[0] = diag[n - 1] = ih2;
    for (double& d : diag) d += 1.0;
  }
  return detail::solve_tridiagonal(sub, diag, sup, rhs);
}

// Zero-flux 1D Poisson with compatible data: integrate the flux, then u.
std::vector<double> solve_1d_neumann(const Grid& g, const std::vector<double>& rhs) {
  const int n = g.cells_per_axis();
  const double h = g.spacing();
  std::vector<double> u(n, 0.0);
  double flux = 0.0;  // F_{i+1/2} = -(u_{i+1} - u_i)/h
  for (int i = 0; i + 1 < n; ++i) {
    flux += rhs[i] * h;
    u[i + 1] = u[i] - flux * h;
  }
  remove_mean(u);
  return u;
}

std::vector<double> solve_periodic_fft(const Grid& g, const std::vector<double>& rhs) {
  const int n = g.cells_per_axis();
  const int d = g.dimension();
  const int nc = n / 2 + 1;
  const std::size_t nspec = d == 1 ? std::size_t(nc) : std::size_t(n) * std::size_t(nc);
  std::vector<double> in(rhs);
  std::vector<std::complex<double>> spec(nspec);
  auto* sp = reinterpret_cast<fftw_complex*>(spec.data());
  fftw_plan fwd = d == 1 ? fftw_plan_dft_r2c_1d(n, in.data(), sp, FFTW_ESTIMATE)
                         : fftw_plan_dft_r2c_2d(n, n, in.data(), sp, FFTW_ESTIMATE);
  fftw_execute(fwd);
  fftw_destroy_plan(fwd);

  const auto eig = [&](int k, int axis) {
    const double h = g.spacing(axis);
    return (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * k / n)) / (h * h);
  };
  for (std::size_t s = 0; s < nspec; ++s) {
    const int kx = int(s % std::size_t(nc));
    const int ky = d == 1 ? 0 : int(s / std::size_t(nc));
    const double lam = eig(kx, 0) + (d == 2 ? eig(ky, 1) : 0.0);
    spec[s] = lam == 0.0 ? std::complex<double>(0.0) : spec[s] / lam;
  }
  std::vector<double> u(g.size());
  fftw_plan bwd = d == 1 ? fftw_plan_dft_c2r_1d(n, sp, u.data(), FFTW_ESTIMATE)
                         : fftw_plan_dft_c2r_2d(n, n, sp, u.data(), FFTW_ESTIMATE);
  fftw_execute(bwd);
  fftw_destroy_plan(bwd);
  const double scale = 1.0 / double(g.size());
  for (double& v : u) v *= scale;
  remove_mean(u);
  return u;
}

std::vector<double> solve_cg(const Grid& g, std::vector<double> rhs, const PoissonOptions& opts) {
  const bool singular = g.domain().coupling == Coupling::neumann_shifted;
  if (singular) remove_mean(rhs);
  const auto diag = stencil_diagonal(g);
  const std::size_t n = g.size();
  std::vector<double> x(n, 0.0), r(rhs), z(n), p(n);
  const auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const double rhs_norm = std::sqrt(dot(rhs, rhs));
  if (rhs_norm == 0.0) return x;
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  if (singular) remove_mean(z);
  p = z;
  double rz = dot(r, z);
  for (int it = 0; it < opts.cg_max_iters; ++it) {
    const auto ap = apply_stencil(g, p);
    const double alpha = rz / dot(p, ap);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    if (std::sqrt(dot(r, r)) <= opts.cg_rel_tol * rhs_norm) {
      if (singular) remove_mean(x);
      return x;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    if (singular) remove_mean(z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw Error(ErrorKind::solver, "conjugate gradient did not reach tolerance",
              std::sqrt(dot(r, r)) / rhs_norm);
}

}  // namespace

double freespace_kernel(double dx, double dy, double cell_area) {
  const double r2 = dx * dx + dy * dy;
  if (r2 == 0.0) {
    // Mean of log|z| over the disk of radius R is log R − 1/2.
    const double radius = std::sqrt(cell_area / std::numbers::pi);
    return (std::log(radius) - 0.5) / (2.0 * std::numbers::pi);
  }
  return std::log(r2) / (4.0 * std::numbers::pi);
}

PotentialSolve solve_potential(const DensityField& rho, const PoissonOptions& opts) {
  const Grid& g = rho.grid;
  const auto c = g.domain().coupling;
  PotentialSolve out;
  out.variant = c;

  if (c == Coupling::freespace) {
    const double vol = g.cell_volume();
    std::vector<double> u(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto xi = g.center(i);
      double s = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (rho.values[j] == 0.0) continue;
        const auto xj = g.center(j);
        s += freespace_kernel(xi[0] - xj[0], xi[1] - xj[1], vol) * rho.values[j];
      }
      u[i] = -s * vol;
    }
    out.u = ScalarField(g, std::move(u));
    out.residual = 0.0;
    return out;
  }

  const auto rhs = right_hand_side(rho);
  std::vector<double> u;
  if (c == Coupling::periodic) {
    u = solve_periodic_fft(g, rhs);
  } else if (g.dimension() == 1) {
    u = c == Coupling::neumann_shifted ? solve_1d_neumann(g, rhs) : solve_1d_tridiagonal(g, rhs);
  } else {
    u = solve_cg(g, rhs, opts);
  }
  std::vector<double> expected = rhs;
  if (c == Coupling::neumann_shifted || c == Coupling::periodic) remove_mean(expected);
  out.residual = max_abs_diff(apply_stencil(g, u), expected);
  out.u = ScalarField(g, std::move(u));
  return out;
}

ScalarField laplacian_apply(const ScalarField& u, const DomainSpec& domain) {
  const Grid g(domain, u.grid.cells_per_axis());
  return ScalarField(u.grid, apply_stencil(g, u.values));
}

ScalarField laplacian_apply(const ScalarField& u) {
  return laplacian_apply(u, u.grid.domain());
}

double dirichlet_energy(const ScalarField& u) {
  const Grid& g = u.grid;
  const auto c = g.domain().coupling;
  const int n = g.cells_per_axis();
  const double vol = g.cell_volume();
  double e = 0.0;
  for (std::size_t cell = 0; cell < g.size(); ++cell) {
    const auto ij = g.multi_index(cell);
    for (int a = 0; a < g.dimension(); ++a) {
      const double h = g.spacing(a);
      auto nb = ij;
      nb[a] += 1;
      if (nb[a] < n) {
        const double du = (u.values[g.flat_index(nb[0], nb[1])] - u.values[cell]) / h;
        e += du * du * vol;
      } else if (is_periodic(c)) {
        nb[a] = 0;
        const double du = (u.values[g.flat_index(nb[0], nb[1])] - u.values[cell]) / h;
        e += du * du * vol;
      }
      if (has_dirichlet_walls(c)) {
        // Half-cell faces between the wall (u = 0) and the outer centers.
        const int walls = (ij[a] == 0) + (ij[a] == n - 1);
        const double du = 2.0 * u.values[cell] / h;
        e += walls * du * du * 0.5 * vol;
      }
    }
  }
  return e;
}

double coupling_energy(const PotentialSolve& potential, const DensityField& rho) {
  const double vol = rho.grid.cell_volume();
  switch (potential.variant) {
    case Coupling::freespace: {
      double s = 0.0;
      for (std::size_t i = 0; i < rho.size(); ++i) s += rho.values[i] * potential.u.values[i];
      return s * vol;
    }
    case Coupling::neumann_helmholtz: {
      double s = 0.0;
      for (double v : potential.u.values) s += v * v;
      return dirichlet_energy(potential.u) + s * vol;
    }
    default:
      return dirichlet_energy(potential.u);
  }
}

double freespace_interaction(const DensityField& rho) {
  const Grid& g = rho.grid;
  if (g.dimension() != 2)
    throw Error(ErrorKind::invalid_argument, "freespace interaction is only built for d = 2");
  const double vol = g.cell_volume();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto xi = g.center(i);
    for (std::size_t j = 0; j < g.size(); ++j) {
      const auto xj = g.center(j);
      s += rho.values[i] * rho.values[j] * freespace_kernel(xi[0] - xj[0], xi[1] - xj[1], vol);
    }
  }
  return s * vol * vol;
}

}  // namespace ksjko
