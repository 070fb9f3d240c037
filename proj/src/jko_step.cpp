#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numeric>
#include <cstdlib>

#include "ksjko/detail/cumulative.hpp"
#include "ksjko/detail/tridiagonal.hpp"
#include "ksjko/error.hpp"
#include "ksjko/jko.hpp"

namespace ksjko {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Quadratic transport cost between the piecewise-constant source with
// cumulative masses A (cell width h) and a fixed target, together with its
// gradient and tridiagonal Hessian in A_1..A_{n-1}.
class PiecewiseW2 {
 public:
  PiecewiseW2(const DensityField& g, double total)
      : grid_(g.grid), B_(detail::CumulativeMass::from_masses(g.masses(), total / total_mass(g))) {}

  struct Terms {
    double W = 0.0;
    std::vector<double> I1, I2, K00, K01, K11;
  };

  Terms evaluate(const detail::CumulativeMass& A, bool with_second) const {
    const std::size_t n = A.cells();
    const double h = grid_.spacing();
    Terms t;
    t.I1.assign(n, 0.0);
    t.I2.assign(n, 0.0);
    if (with_second) {
      t.K00.assign(n, 0.0);
      t.K01.assign(n, 0.0);
      t.K11.assign(n, 0.0);
    }
    detail::for_each_piece(A, B_, [&](std::size_t i, std::size_t j, double u0, double u1,
                                      double v0, double v1, double dm) {
      // D(u) = x(u) − Y(u) = alpha + beta u on [u0, u1].
      const double e = grid_.edge(int(i)), yl = grid_.edge(int(j));
      const double b = B_.cell(j);
      if (dm <= 0.0) {
        add_piece(t, i, 0.0, 1.0, e - (yl + v0 * h), h, h / b, with_second, 0.0);
        return;
      }
      const double slope = (v1 - v0) * h / (u1 - u0);
      const double y0 = yl + v0 * h - slope * u0;
      add_piece(t, i, u0, u1, e - y0, h - slope, h / b, with_second, A.cell(i));
    });
    return t;
  }

 private:
  // D(t) = alpha + beta t on [t0, t1]; Y′ = yp.
  static void add_piece(Terms& t, std::size_t i, double t0, double t1, double alpha, double beta,
                        double yp, bool with_second, double a) {
    double M[3];
    for (int k = 0; k < 3; ++k) M[k] = (std::pow(t1, k + 1) - std::pow(t0, k + 1)) / (k + 1);
    // ∫D(1−t), ∫D t, ∫D²
    const double Dt = alpha * M[1] + beta * M[2];
    const double D1 = alpha * M[0] + beta * M[1];
    t.I1[i] += D1 - Dt;
    t.I2[i] += Dt;
    t.W += a * (alpha * alpha * M[0] + 2.0 * alpha * beta * M[1] + beta * beta * M[2]);
    if (with_second) {
      t.K00[i] += yp * (M[0] - 2.0 * M[1] + M[2]);
      t.K01[i] += yp * (M[1] - M[2]);
      t.K11[i] += yp * M[2];
    }
  }

  Grid grid_;
  detail::CumulativeMass B_;
};

enum class Bound { free, lower, upper };

struct Subproblem {
  const DensityField& g;
  const Nonlinearity& nl;
  std::vector<double> chi_u;  // χ u_i
  double tau;
  double cap_mass;  // M h
  double total;
  double h;
  PiecewiseW2 w2;

  double separable(const detail::CumulativeMass& A) const {
    double s = 0.0;
    for (std::size_t i = 0; i < A.cells(); ++i) {
      const double a = A.cell(i);
      s += h * f_derivatives(nl, std::max(a, 0.0) / h).f - chi_u[i] * a;
    }
    return s;
  }
  double objective(const detail::CumulativeMass& A) const {
    return separable(A) + w2.evaluate(A, false).W / (2.0 * tau);
  }
};

struct InnerOutcome {
  detail::CumulativeMass A;
  std::vector<Bound> state;
  int iterations = 0;
  double residual = 0.0;
};

// ψ_i = ∂Φ/∂a_i up to a common constant, from the breakpoint gradient.
std::vector<double> cell_gradients(const std::vector<double>& grad_A) {
  const std::size_t n = grad_A.size() + 1;
  std::vector<double> psi(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) psi[k] = psi[k - 1] - grad_A[k - 1];
  return psi;
}

InnerOutcome solve_frozen(const Subproblem& sp, detail::CumulativeMass A,
                          std::vector<Bound> state, const JkoConfig& cfg) {
  const std::size_t n = A.cells();
  const bool singular = sp.nl.log_singular();
  const double h = sp.h;
  // Log-singular cells whose mass would fall below this are set to zero; the
  // density there underflows anyway. They are judged at the floor density.
  const double floor_mass = singular ? 1e-250 * A.total : 0.0;
  InnerOutcome out;

  for (int it = 0; it < cfg.max_inner_iters; ++it) {
    out.iterations = it + 1;
    const auto terms = sp.w2.evaluate(A, true);
    std::vector<double> s1(n), s2(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = A.cell(i);
      const auto fd = f_derivatives(sp.nl, std::max(a, floor_mass) / h);
      s1[i] = (std::isfinite(fd.df) ? fd.df : -1e300) - sp.chi_u[i];
      s2[i] = std::isfinite(fd.d2f) ? fd.d2f / h : 1e300;
    }
    const double iw = 1.0 / (2.0 * sp.tau);
    // Breakpoint k = 1..n-1 stored at index k-1.
    std::vector<double> grad(n - 1), diag(n - 1), off(n - 1, 0.0);
    for (std::size_t k = 1; k < n; ++k) {
      grad[k - 1] = s1[k - 1] - s1[k] - 2.0 * h * (terms.I2[k - 1] + terms.I1[k]) * iw;
      diag[k - 1] = s2[k - 1] + s2[k] + 2.0 * h * (terms.K11[k - 1] + terms.K00[k]) * iw;
      if (k + 1 < n) off[k - 1] = -s2[k] + 2.0 * h * terms.K01[k] * iw;
    }

    // Release bound cells whose multiplier has the wrong sign.
    const auto psi = cell_gradients(grad);
    std::vector<double> free_psi;
    for (std::size_t i = 0; i < n; ++i)
      if (state[i] == Bound::free) free_psi.push_back(psi[i]);
    double spread = 0.0, c = 0.0;
    if (!free_psi.empty()) {
      const auto [mn, mx] = std::minmax_element(free_psi.begin(), free_psi.end());
      spread = *mx - *mn;
      c = 0.5 * (*mx + *mn);
    }
    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      if (state[i] == Bound::free) scale = std::max(scale, std::abs(s1[i]));
    // Floor set by rounding in the cumulative gradient sums.
    double gmag = 0.0;
    for (std::size_t k = 1; k < n; ++k)
      gmag = std::max(gmag, std::abs(s1[k - 1]) + std::abs(s1[k]) +
                                2.0 * h * (std::abs(terms.I2[k - 1]) + std::abs(terms.I1[k])) * iw);
    const double tol = std::max(cfg.inner_tol * scale, 16.0 * 2.2e-16 * double(n) * gmag);
    out.residual = spread / scale;
    if (spread <= tol) {
      bool released = false;
      double worst = tol;
      std::size_t worst_i = n;
      for (std::size_t i = 0; i < n; ++i) {
        const double viol = state[i] == Bound::upper   ? psi[i] - c
                            : state[i] == Bound::lower ? c - psi[i]
                                                       : 0.0;
        if (viol > worst) { worst = viol; worst_i = i; }
      }
      if (worst_i < n) {
        state[worst_i] = Bound::free;
        released = true;
      }
      if (!released) break;
      continue;
    }

    // Groups of breakpoints tied together by bound cells.
    std::vector<int> group(n + 1, -1);
    int ng = 0;
    bool pinned = true;  // the current group contains A_0
    for (std::size_t k = 1; k <= n; ++k) {
      if (state[k - 1] == Bound::free) {
        pinned = false;
        group[k] = ng++;
      } else {
        group[k] = pinned ? -1 : group[k - 1];
      }
    }
    // The group holding A_n is pinned as well.
    {
      const int last = group[n];
      if (last >= 0)
        for (std::size_t k = 0; k <= n; ++k)
          if (group[k] == last) group[k] = -1;
      if (last >= 0) ng = last;
    }
    if (ng == 0) break;
    std::vector<double> rg(ng, 0.0), rd(ng, 0.0), ro(ng, 0.0), rs(ng, 0.0);
    for (std::size_t k = 1; k < n; ++k) {
      const int gk = group[k];
      if (gk < 0) continue;
      rg[gk] += grad[k - 1];
      rd[gk] += diag[k - 1];
      if (k + 1 < n) {
        const int gn = group[k + 1];
        if (gn == gk) rd[gk] += 2.0 * off[k - 1];
        else if (gn == gk + 1) ro[gk] += off[k - 1];
      }
    }
    std::vector<double> neg(ng), sub(ng, 0.0), sup(ng, 0.0), dd(rd);
    for (int q = 0; q < ng; ++q) {
      neg[q] = -rg[q];
      dd[q] += 1e-13 * std::abs(rd[q]) + 1e-300;
      sup[q] = ro[q];
      if (q > 0) sub[q] = ro[q - 1];
    }
    std::vector<double> step = detail::solve_tridiagonal(sub, dd, sup, neg);
    double slope = 0.0;
    for (int q = 0; q < ng; ++q) slope += step[q] * rg[q];
    if (!(slope < 0.0)) {
      for (int q = 0; q < ng; ++q) step[q] = -rg[q] / std::max(rd[q], 1e-300);
      slope = 0.0;
      for (int q = 0; q < ng; ++q) slope += step[q] * rg[q];
    }
    std::vector<double> dA(n + 1, 0.0);
    for (std::size_t k = 1; k < n; ++k)
      if (group[k] >= 0) dA[k] = step[group[k]];

    // Largest step keeping free cells inside their box.
    double amax = kInf;
    std::size_t hit = n;
    Bound hit_kind = Bound::free;
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i] != Bound::free) continue;
      const double a = A.cell(i), da = dA[i + 1] - dA[i];
      if (da > 0.0 && std::isfinite(sp.cap_mass)) {
        const double s = (sp.cap_mass - a) / da;
        if (s < amax) { amax = s; hit = i; hit_kind = Bound::upper; }
      } else if (da < 0.0) {
        const bool to_zero = !singular || a * 1e-6 <= floor_mass;
        const double s = to_zero ? a / -da : (1.0 - 1e-6) * a / -da;
        if (s < amax) { amax = s; hit = to_zero ? i : n; hit_kind = to_zero ? Bound::lower : Bound::free; }
      }
    }
    double alpha = std::min(1.0, amax);
    const bool hits = alpha == amax && hit < n;
    const double phi0 = sp.objective(A);
    detail::CumulativeMass trial(A);
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = A;
      for (std::size_t k = 1; k < n; ++k) trial.shift(k, alpha * dA[k]);
      if (hits && alpha == amax) {
        // Land exactly on the bound that stops the step.
        const double target = hit_kind == Bound::upper ? sp.cap_mass : 0.0;
        const double shift = target - trial.cell(hit);
        const bool right = group[hit + 1] >= 0;
        const int moved = right ? group[hit + 1] : group[hit];
        for (std::size_t k = 1; k < n; ++k)
          if (group[k] == moved) trial.shift(k, right ? shift : -shift);
      }
      const double phi1 = sp.objective(trial);
      if (std::isfinite(phi1) && phi1 <= phi0 + 1e-4 * alpha * slope + 1e-15 * std::abs(phi0)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (spread <= 1e-6 * scale) break;
      throw Error(ErrorKind::convergence, "line search failed in the transport step", spread);
    }
    double moved = 0.0;
    for (std::size_t k = 1; k < n; ++k) moved = std::max(moved, std::abs(alpha * dA[k]));
    A = trial;
    if (hits && alpha == amax) state[hit] = hit_kind;
    else if (moved <= 1e-15 * A.total && spread <= 1e-6 * scale) break;
  }
  if (out.iterations == cfg.max_inner_iters && out.residual > 1e-6)
    throw Error(ErrorKind::convergence, "transport step exhausted its iteration budget",
                out.residual);
  out.A = std::move(A);
  out.state = std::move(state);
  return out;
}

}  // namespace

namespace {

struct Core {
  DensityField rho;
  ScalarField u;
  ScalarField phi_kkt;  // empty → use the exact transport potential
  std::vector<bool> capped;
  double mass_defect = 0.0;
  int outer = 0;
  int inner = 0;
  double outer_residual = 0.0;
  double plan_cost = std::numeric_limits<double>::quiet_NaN();
  bool non_monotone = false;
};

// Feasible starting masses: g clamped at the cap with the excess spread
// over the remaining room, mixed with the uniform state when strictly
// positive masses are required.
std::vector<double> feasible_start(std::vector<double> a, double cap_mass, bool positive) {
  const std::size_t n = a.size();
  const double total = std::accumulate(a.begin(), a.end(), 0.0);
  if (positive && std::any_of(a.begin(), a.end(), [](double v) { return v <= 0.0; }))
    for (double& v : a) v = (1.0 - 1e-3) * v + 1e-3 * total / double(n);
  if (!std::isfinite(cap_mass)) return a;
  double excess = 0.0, room = 0.0;
  for (double& v : a) {
    if (v > cap_mass) {
      excess += v - cap_mass;
      v = cap_mass;
    } else {
      room += cap_mass - v;
    }
  }
  if (excess > 0.0)
    for (double& v : a)
      if (v < cap_mass) v += excess * (cap_mass - v) / room;
  return a;
}

DensityField density_from_masses(const Grid& grid, const std::vector<double>& a,
                                 const std::vector<bool>& capped, double cap,
                                 double& mass_defect) {
  const double vol = grid.cell_volume();
  std::vector<double> rho(a.size());
  double capped_mass = 0.0, free_mass = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (capped[i]) {
      rho[i] = cap;
      capped_mass += cap * vol;
    } else {
      rho[i] = std::max(a[i], 0.0) / vol;
      free_mass += rho[i] * vol;
    }
  }
  mass_defect = std::abs(capped_mass + free_mass - 1.0);
  if (mass_defect > 1e-6)
    throw Error(ErrorKind::solver, fmt::format("step lost mass: defect {:.3e}", mass_defect),
                mass_defect);
  if (free_mass > 0.0) {
    const double s = (1.0 - capped_mass) / free_mass;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!capped[i]) rho[i] *= s;
  }
  return DensityField(grid, std::move(rho));
}

double max_abs_change(const ScalarField& a, const ScalarField& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
  return r;
}

Core solve_1d(const DensityField& g, const JkoConfig& cfg, const Nonlinearity& nl) {
  const Grid& grid = g.grid;
  const std::size_t n = grid.size();
  const double h = grid.spacing();
  const double cap = cfg.cap();
  const double cap_mass = cap * h;
  const bool singular = nl.log_singular();

  auto a = feasible_start(g.masses(), cap_mass, singular);
  const double total = std::accumulate(a.begin(), a.end(), 0.0);
  std::vector<Bound> state(n, Bound::free);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(cap_mass) && a[i] >= cap_mass) state[i] = Bound::upper;
    else if (!singular && a[i] <= 0.0) state[i] = Bound::lower;
  }
  std::vector<double> start(n);
  for (std::size_t i = 0; i < n; ++i)
    start[i] = state[i] == Bound::upper ? cap_mass : state[i] == Bound::lower ? 0.0 : a[i];
  auto A = detail::CumulativeMass::from_masses(start);

  Subproblem sp{g, nl, std::vector<double>(n, 0.0), cfg.tau, cap_mass, total, h,
                PiecewiseW2(g, total)};
  Core core;
  const auto to_rho = [&](const detail::CumulativeMass& AA, const std::vector<Bound>& st) {
    std::vector<double> m(n);
    std::vector<bool> capped(n);
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = st[i] == Bound::lower ? 0.0 : AA.cell(i);
      capped[i] = st[i] == Bound::upper;
    }
    core.capped = capped;
    return density_from_masses(grid, m, capped, cap, core.mass_defect);
  };

  DensityField rho = to_rho(A, state);
  ScalarField u = cfg.chi != 0.0 ? solve_potential(rho).u : ScalarField(grid, 0.0);
  double last_objective = kInf;
  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    for (std::size_t i = 0; i < n; ++i) sp.chi_u[i] = cfg.chi * u[i];
    auto inner = solve_frozen(sp, A, state, cfg);
    core.inner += inner.iterations;
    core.outer = outer + 1;
    if (cfg.damping < 1.0 && outer > 0) {
      for (std::size_t k = 0; k <= n; ++k) {
        inner.A.lo[k] = (1.0 - cfg.damping) * A.lo[k] + cfg.damping * inner.A.lo[k];
        inner.A.hi[k] = (1.0 - cfg.damping) * A.hi[k] + cfg.damping * inner.A.hi[k];
      }
      for (std::size_t i = 0; i < n; ++i)
        if (inner.state[i] != state[i]) inner.state[i] = Bound::free;
    }
    A = std::move(inner.A);
    state = std::move(inner.state);
    rho = to_rho(A, state);
    if (cfg.chi == 0.0) break;
    ScalarField u_new = solve_potential(rho).u;
    core.outer_residual = max_abs_change(u_new, u);
    u = std::move(u_new);
    const double obj = jko_objective_1d(rho, g, cfg, nl);
    if (obj > last_objective + 1e-12 * std::abs(last_objective)) core.non_monotone = true;
    last_objective = obj;
    if (core.outer_residual <= cfg.fixed_point_tol) break;
  }
  if (cfg.chi != 0.0 && core.outer_residual > cfg.fixed_point_tol)
    throw Error(ErrorKind::convergence, "potential fixed point did not converge",
                core.outer_residual);
  core.rho = std::move(rho);
  core.u = std::move(u);
  return core;
}

double log_sum_exp(const double* v, std::size_t n) {
  double mx = -kInf;
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

Core solve_2d(const DensityField& g, const JkoConfig& cfg, const Nonlinearity& nl) {
  const Grid& grid = g.grid;
  const std::size_t N = grid.size();
  const double vol = grid.cell_volume();
  const double h = grid.spacing();
  const double eps = cfg.entropic_eps > 0.0 ? cfg.entropic_eps : h * h;
  const double sigma = 2.0 * cfg.tau / eps;
  const double cap = cfg.cap();

  std::vector<std::size_t> cols;
  std::vector<double> log_g;
  const auto gm = g.masses();
  for (std::size_t j = 0; j < N; ++j)
    if (gm[j] > 0.0) { cols.push_back(j); log_g.push_back(std::log(gm[j])); }
  const std::size_t M = cols.size();
  std::vector<double> negC(N * M);  // −C_ij/ε
  for (std::size_t i = 0; i < N; ++i) {
    const auto x = grid.center(i);
    for (std::size_t q = 0; q < M; ++q) {
      const auto y = grid.center(cols[q]);
      const double dx = x[0] - y[0], dy = x[1] - y[1];
      negC[i * M + q] = -(dx * dx + dy * dy) / eps;
    }
  }

  Core core;
  std::vector<double> log_p(N, 0.0), log_q(M, 0.0), a(N), buf(std::max(N, M));
  core.capped.assign(N, false);
  std::vector<double> start = feasible_start(gm, cap * vol, nl.log_singular());
  double defect = 0.0;
  DensityField rho = density_from_masses(grid, start, std::vector<bool>(N, false), cap, defect);
  ScalarField u = cfg.chi != 0.0 ? solve_potential(rho).u : ScalarField(grid, 0.0);

  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    core.outer = outer + 1;
    double gap = kInf;
    int it = 0;
    for (; it < cfg.max_inner_iters * 20 && gap > cfg.inner_tol; ++it) {
      gap = 0.0;
      // Row prox, then the column projection measured on the resulting plan.
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t q = 0; q < M; ++q) buf[q] = log_q[q] + negC[i * M + q];
        const double log_kq = log_sum_exp(buf.data(), M);
        const double r = kl_prox_cell_log(log_kq - std::log(vol) + sigma * cfg.chi * u[i], sigma,
                                          nl, cap);
        a[i] = r * vol;
        core.capped[i] = r >= cap;
        log_p[i] = r > 0.0 ? std::log(a[i]) - log_kq : -kInf;
      }
      for (std::size_t q = 0; q < M; ++q) {
        for (std::size_t i = 0; i < N; ++i) buf[i] = log_p[i] + negC[i * M + q];
        const double lse = log_sum_exp(buf.data(), N);
        gap += std::abs(std::exp(log_q[q] + lse) - std::exp(log_g[q]));
        log_q[q] = log_g[q] - lse;
      }
    }
    core.inner += it;
    if (gap > cfg.inner_tol)
      throw Error(ErrorKind::convergence,
                  fmt::format("entropic step marginal gap {:.3e}", gap), gap);
    rho = density_from_masses(grid, a, core.capped, cap, core.mass_defect);
    if (cfg.chi == 0.0) break;
    ScalarField u_new = solve_potential(rho).u;
    core.outer_residual = max_abs_change(u_new, u);
    u = std::move(u_new);
    if (core.outer_residual <= cfg.fixed_point_tol) break;
  }
  if (cfg.chi != 0.0 && core.outer_residual > cfg.fixed_point_tol)
    throw Error(ErrorKind::convergence, "potential fixed point did not converge",
                core.outer_residual);

  std::vector<double> phi(N, 0.0);
  double mean = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < N; ++i)
    if (std::isfinite(log_p[i])) { phi[i] = 0.5 * eps * log_p[i]; mean += phi[i]; ++count; }
  if (count > 0) mean /= double(count);
  for (std::size_t i = 0; i < N; ++i)
    if (std::isfinite(log_p[i])) phi[i] -= mean;
  core.phi_kkt = ScalarField(grid, std::move(phi));

  double cost = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t q = 0; q < M; ++q)
      cost += std::exp(log_p[i] + log_q[q] + negC[i * M + q]) * (-negC[i * M + q] * eps);
  core.plan_cost = cost;
  core.rho = std::move(rho);
  core.u = std::move(u);
  return core;
}

}  // namespace

double JkoConfig::cap() const {
  if (cap_M) return *cap_M;
  if (chi == 0.0) return kInf;
  return 1.0 / (chi * tau);
}

void JkoConfig::validate() const {
  const auto bad = [](const std::string& what) { throw Error(ErrorKind::parameter, what); };
  if (!(chi >= 0.0) || !std::isfinite(chi)) bad("chi must be finite and nonnegative");
  if (!(tau > 0.0)) bad("tau must be positive");
  if (!(lambda_monitor > 1.0)) bad("lambda must exceed 1");
  if (!(eps0 > 0.0)) bad("eps0 must be positive");
  if (!(t0 >= 0.0)) bad("t0 must be nonnegative");
  if (cap_M && !(*cap_M > 0.0)) bad("cap must be positive");
  if (!(entropic_eps >= 0.0)) bad("entropic_eps must be nonnegative");
  if (!(inner_tol > 0.0) || !(fixed_point_tol > 0.0)) bad("tolerances must be positive");
  if (max_inner_iters < 1 || max_outer_iters < 1) bad("iteration budgets must be positive");
  if (!(damping > 0.0 && damping <= 1.0)) bad("damping must lie in (0, 1]");
  if (!(monitor_slack_rel >= 0.0)) bad("monitor slack must be nonnegative");
}

double jko_objective_1d(const DensityField& rho, const DensityField& g, const JkoConfig& cfg,
                        const Nonlinearity& nl) {
  const auto energy = total_energy(rho, nl, cfg.chi);
  const auto tr = w2_quantile_1d(rho, g, MeasureModel::piecewise_constant, 1e-6);
  return energy.total + tr.w2_squared / (2.0 * cfg.tau);
}

StepResult jko_step(const DensityField& g, const JkoConfig& cfg, const Nonlinearity& nl) {
  cfg.validate();
  validate_density(g, 1e-9);
  const Grid& grid = g.grid;
  const double cap = cfg.cap();
  if (std::isfinite(cap) && cap * grid.domain().volume() < 1.0 - 1e-12)
    throw Error(ErrorKind::parameter,
                fmt::format("cap {} cannot hold unit mass on a domain of volume {}", cap,
                            grid.domain().volume()));
  if (!nl.superlinear())
    throw Error(ErrorKind::parameter, "the bare `none` law needs a regularization");

  Core core = grid.dimension() == 1 ? solve_1d(g, cfg, nl) : solve_2d(g, cfg, nl);

  StepResult out;
  out.rho = std::move(core.rho);
  out.u = std::move(core.u);
  auto& r = out.report;
  if (grid.dimension() == 1) {
    out.transport = w2_quantile_1d(out.rho, g);
  } else {
    const double eps = cfg.entropic_eps > 0.0 ? cfg.entropic_eps : grid.spacing() * grid.spacing();
    out.transport = sinkhorn_entropic(out.rho, g, eps);
    r.entropic_bias = core.plan_cost - out.transport.w2_squared;
  }
  r.w2_squared = out.transport.w2_squared;

  PotentialSolve ps;
  ps.u = out.u;
  ps.variant = grid.domain().coupling;
  r.energy = cfg.chi != 0.0 ? total_energy(out.rho, nl, cfg.chi, ps) : total_energy(out.rho, nl, 0.0);
  r.objective = r.energy.total + r.w2_squared / (2.0 * cfg.tau);
  const auto prev = total_energy(g, nl, cfg.chi);
  r.dissipation_slack = energy_dissipation_check(prev.total, r.energy.total, r.w2_squared, cfg.tau);
  r.dissipation_slack_half = prev.total - r.energy.total - r.w2_squared / (2.0 * cfg.tau);

  const auto kkt = kkt_residual(out.rho, g, out.u,
                                core.phi_kkt.size() ? core.phi_kkt : out.transport.phi, cfg, nl);
  r.kkt_residual = kkt.residual;
  r.kkt_constant_c = kkt.c;
  r.pressure_max = kkt.pressure_max;
  r.complementarity_defect = kkt.complementarity_defect;
  r.active_fraction = kkt.active_fraction;
  r.kkt_degenerate = kkt.degenerate;

  const auto linf = linf_norm(out.rho);
  const double g_linf = linf_norm(g).value;
  r.linf = linf.value;
  r.argmax_cell = linf.index;
  r.argmax_interior = !grid.on_boundary(linf.index);
  const auto verdict = linf_monitor(g_linf, linf.value, cfg, grid.dimension());
  r.inv_linf = verdict.inv_new;
  r.required_inv_linf_bound = verdict.required_inv;
  r.linf_bound_required = verdict.required_linf;
  r.monitor_X = verdict.X;
  r.monitor_Y = verdict.Y;
  r.monitor_pass = verdict.pass();
  r.mass_defect = core.mass_defect;
  r.outer_iterations = core.outer;
  r.inner_iterations = core.inner;
  r.outer_residual = core.outer_residual;
  r.non_monotone = core.non_monotone;
  r.above_c0 = cfg.c0_empirical > 0.0 && cfg.tau * cfg.chi * g_linf > cfg.c0_empirical;
  return out;
}

}  // namespace ksjko
