#include <doctest.h>

#include <cmath>
#include <random>

#include "ksjko/energy.hpp"
#include "ksjko/error.hpp"
#include "ksjko/poisson.hpp"

using namespace ksjko;

namespace {

std::vector<Nonlinearity> laws() {
  return {Nonlinearity::entropy(), Nonlinearity::power(2.0), Nonlinearity::power(1.5),
          Nonlinearity::regularized(Nonlinearity::none(), 1e-2),
          Nonlinearity::regularized(Nonlinearity::power(3.0), 0.1)};
}

}  // namespace

TEST_CASE("nonlinearity specs round-trip") {
  for (const auto& nl : laws()) CHECK(Nonlinearity::parse(nl.to_string()).to_string() == nl.to_string());
  CHECK(Nonlinearity::parse("power:m=2").kind() == Nonlinearity::Kind::power);
  CHECK(Nonlinearity::parse("regularized:base=power:m=2,delta=0.5").delta() == 0.5);
  CHECK_THROWS_AS(Nonlinearity::parse("power:m=1"), Error);
  CHECK_THROWS_AS(Nonlinearity::parse("entropyy"), Error);
  CHECK(Nonlinearity::entropy().log_singular());
  CHECK(!Nonlinearity::power(2.0).log_singular());
}

TEST_CASE("derivatives agree with finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.05, 4.0);
  for (const auto& nl : laws()) {
    for (int t = 0; t < 40; ++t) {
      const double x = U(rng), e = 1e-5 * x;
      const auto d = f_derivatives(nl, x);
      const double df = (f_derivatives(nl, x + e).f - f_derivatives(nl, x - e).f) / (2 * e);
      const double d2 = (f_derivatives(nl, x + e).df - f_derivatives(nl, x - e).df) / (2 * e);
      CHECK(d.df == doctest::Approx(df).epsilon(1e-7));
      CHECK(d.d2f == doctest::Approx(d2).epsilon(1e-6));
      CHECK(psi_eval(nl, x) == doctest::Approx(x * d.df - d.f).epsilon(1e-12));
      CHECK(psi_prime(nl, x) == doctest::Approx(x * d.d2f).epsilon(1e-12));
    }
  }
  CHECK(f_derivatives(Nonlinearity::entropy(), 0.0).f == 0.0);
  CHECK(std::isinf(f_derivatives(Nonlinearity::entropy(), 0.0).df));
  CHECK_THROWS_AS(f_derivatives(Nonlinearity::entropy(), -1.0), Error);
}

TEST_CASE("kl prox cell solves its scalar problem") {
  // Oracle: dense scan of γ f(s) + s log(s/q) − s + q over [0, M].
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> Uq(0.01, 3.0), Ug(0.01, 2.0);
  for (const auto& nl : laws()) {
    for (int t = 0; t < 10; ++t) {
      const double q = Uq(rng), gamma = Ug(rng), cap = t % 2 ? 1.0 : 1e9;
      const auto obj = [&](double s) {
        return gamma * f_derivatives(nl, s).f + (s > 0 ? s * std::log(s / q) : 0.0) - s + q;
      };
      const double s = kl_prox_cell(q, gamma, nl, cap);
      CHECK(s >= 0.0);
      CHECK(s <= cap);
      const double hi = std::min(cap, 10.0);
      double best = obj(s);
      for (int k = 1; k <= 20000; ++k) best = std::min(best, obj(hi * k / 20000.0));
      CHECK(obj(s) <= best + 1e-9);
    }
  }
  CHECK(kl_prox_cell(0.0, 1.0, Nonlinearity::entropy(), 1.0) == 0.0);
  CHECK(kl_prox_cell_log(-800.0, 0.5, Nonlinearity::power(2.0), 1.0) ==
        doctest::Approx(std::exp(-800.0)).epsilon(1e-10));
}

TEST_CASE("energy split and first variation of the interaction term") {
  const Grid g(DomainSpec::interval(0.0, 1.0), 12);
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.5 * std::sin(double(i));
  const auto rho = normalized(DensityField(g, v));
  const auto nl = Nonlinearity::entropy();
  const auto e0 = total_energy(rho, nl, 0.0);
  CHECK(e0.interaction == 0.0);
  CHECK(e0.total == doctest::Approx(internal_energy(rho, nl)));

  const double chi = 3.0;
  const auto ps = solve_potential(rho);
  const auto e = total_energy(rho, nl, chi, ps);
  CHECK(e.interaction == doctest::Approx(-0.5 * chi * dirichlet_energy(ps.u)).epsilon(1e-12));
  CHECK(e.total == doctest::Approx(e.internal + e.interaction));

  // Moving mass μ from cell j to cell i changes E by 2(u_i − u_j) μ to first order.
  const double h = g.spacing(), mu = 1e-6;
  const auto energy_of = [&](const DensityField& r) {
    return coupling_energy(solve_potential(r), r);
  };
  for (auto [i, j] : {std::pair{2, 7}, std::pair{0, 11}, std::pair{5, 6}}) {
    DensityField p = rho, m = rho;
    p[i] += mu / h;
    p[j] -= mu / h;
    m[i] -= mu / h;
    m[j] += mu / h;
    const double fd = (energy_of(p) - energy_of(m)) / (2 * mu);
    CHECK(fd == doctest::Approx(2.0 * (ps.u[i] - ps.u[j])).epsilon(1e-6));
  }
}
