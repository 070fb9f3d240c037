#include "ksjko/energy.hpp"

#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "ksjko/error.hpp"
#include "ksjko/poisson.hpp"

namespace ksjko {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double parse_number(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::invalid_argument, fmt::format("bad number '{}' for {}", text, what));
  }
}

// f'(e^t) and e^t f''(e^t), evaluated in the log variable so that the
// entropy part never overflows.
struct LogDerivs {
  double df = 0.0;
  double s_d2f = 0.0;
};

LogDerivs log_derivs(const Nonlinearity& nl, double t) {
  switch (nl.kind()) {
    case Nonlinearity::Kind::entropy:
      return {t + 1.0, 1.0};
    case Nonlinearity::Kind::power: {
      const double m = nl.exponent();
      const double e = std::exp((m - 1.0) * t);
      return {m * e / (m - 1.0), m * e};
    }
    case Nonlinearity::Kind::none:
      return {0.0, 0.0};
    case Nonlinearity::Kind::regularized: {
      auto b = log_derivs(*nl.base(), t);
      return {b.df + nl.delta() * (t + 1.0), b.s_d2f + nl.delta()};
    }
  }
  return {};
}

}  // namespace

Nonlinearity Nonlinearity::entropy() { return Nonlinearity{}; }

Nonlinearity Nonlinearity::power(double m) {
  if (!(m > 1.0) || !std::isfinite(m))
    throw Error(ErrorKind::invalid_argument, fmt::format("power law needs m > 1, got {}", m));
  Nonlinearity nl;
  nl.kind_ = Kind::power;
  nl.m_ = m;
  return nl;
}

Nonlinearity Nonlinearity::none() {
  Nonlinearity nl;
  nl.kind_ = Kind::none;
  return nl;
}

Nonlinearity Nonlinearity::regularized(const Nonlinearity& base, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw Error(ErrorKind::invalid_argument,
                fmt::format("regularization needs delta > 0, got {}", delta));
  Nonlinearity nl;
  nl.kind_ = Kind::regularized;
  nl.delta_ = delta;
  nl.base_ = std::make_shared<const Nonlinearity>(base);
  return nl;
}

Nonlinearity Nonlinearity::parse(const std::string& spec) {
  if (spec == "entropy") return entropy();
  if (spec == "none") return none();
  if (spec.rfind("power:", 0) == 0) {
    const std::string rest = spec.substr(6);
    if (rest.rfind("m=", 0) != 0)
      throw Error(ErrorKind::invalid_argument, fmt::format("expected power:m=<val>, got '{}'", spec));
    return power(parse_number(rest.substr(2), "power exponent"));
  }
  if (spec.rfind("regularized:", 0) == 0) {
    // The base may contain ':' and '=' itself, so split at the last ",delta=".
    const std::string rest = spec.substr(12);
    const auto pos = rest.rfind(",delta=");
    if (rest.rfind("base=", 0) != 0 || pos == std::string::npos)
      throw Error(ErrorKind::invalid_argument,
                  fmt::format("expected regularized:base=<spec>,delta=<val>, got '{}'", spec));
    const Nonlinearity base = parse(rest.substr(5, pos - 5));
    return regularized(base, parse_number(rest.substr(pos + 7), "regularization delta"));
  }
  throw Error(ErrorKind::invalid_argument, fmt::format("unknown nonlinearity '{}'", spec));
}

std::string Nonlinearity::to_string() const {
  switch (kind_) {
    case Kind::entropy: return "entropy";
    case Kind::none: return "none";
    case Kind::power: return fmt::format("power:m={}", m_);
    case Kind::regularized: return fmt::format("regularized:base={},delta={}", base_->to_string(), delta_);
  }
  return "";
}

bool Nonlinearity::log_singular() const {
  return kind_ == Kind::entropy || kind_ == Kind::regularized;
}

bool Nonlinearity::superlinear() const { return kind_ != Kind::none; }

FDerivatives f_derivatives(const Nonlinearity& nl, double t) {
  if (!(t >= 0.0))
    throw Error(ErrorKind::domain, fmt::format("f evaluated at negative argument {}", t));
  switch (nl.kind()) {
    case Nonlinearity::Kind::entropy:
      if (t == 0.0) return {0.0, -kInf, kInf};
      return {t * std::log(t), std::log(t) + 1.0, 1.0 / t};
    case Nonlinearity::Kind::power: {
      const double m = nl.exponent();
      const double d2 = t == 0.0 ? (m < 2.0 ? kInf : (m == 2.0 ? 2.0 : 0.0))
                                 : m * std::pow(t, m - 2.0);
      return {std::pow(t, m) / (m - 1.0), m * std::pow(t, m - 1.0) / (m - 1.0), d2};
    }
    case Nonlinearity::Kind::none:
      return {0.0, 0.0, 0.0};
    case Nonlinearity::Kind::regularized: {
      const auto b = f_derivatives(*nl.base(), t);
      const auto e = f_derivatives(Nonlinearity::entropy(), t);
      const double dl = nl.delta();
      return {b.f + dl * e.f, b.df + dl * e.df, b.d2f + dl * e.d2f};
    }
  }
  return {};
}

double psi_eval(const Nonlinearity& nl, double t) {
  if (!(t >= 0.0))
    throw Error(ErrorKind::domain, fmt::format("Ψ evaluated at negative argument {}", t));
  if (t == 0.0) return 0.0;
  const auto d = f_derivatives(nl, t);
  return t * d.df - d.f;
}

double psi_prime(const Nonlinearity& nl, double t) {
  if (!(t >= 0.0))
    throw Error(ErrorKind::domain, fmt::format("Ψ' evaluated at negative argument {}", t));
  switch (nl.kind()) {
    case Nonlinearity::Kind::entropy: return 1.0;
    case Nonlinearity::Kind::power: return nl.exponent() * std::pow(t, nl.exponent() - 1.0);
    case Nonlinearity::Kind::none: return 0.0;
    case Nonlinearity::Kind::regularized: return psi_prime(*nl.base(), t) + nl.delta();
  }
  return 0.0;
}

double internal_energy(const DensityField& rho, const Nonlinearity& nl) {
  double s = 0.0;
  for (double v : rho.values) s += f_derivatives(nl, v).f;
  return s * rho.grid.cell_volume();
}

EnergyReport total_energy(const DensityField& rho, const Nonlinearity& nl, double chi,
                          const PotentialSolve& potential) {
  EnergyReport r;
  r.internal = internal_energy(rho, nl);
  r.interaction = chi == 0.0 ? 0.0 : -0.5 * chi * coupling_energy(potential, rho);
  r.total = r.internal + r.interaction;
  return r;
}

EnergyReport total_energy(const DensityField& rho, const Nonlinearity& nl, double chi) {
  if (chi == 0.0) {
    EnergyReport r;
    r.internal = internal_energy(rho, nl);
    r.total = r.internal;
    return r;
  }
  return total_energy(rho, nl, chi, solve_potential(rho));
}

double kl_prox_cell_log(double log_q, double gamma, const Nonlinearity& nl, double cap) {
  if (std::isnan(log_q) || log_q == kInf)
    throw Error(ErrorKind::invalid_argument, "kl_prox_cell: target must be finite");
  if (!(cap > 0.0)) throw Error(ErrorKind::invalid_argument, "kl_prox_cell: cap must be positive");
  if (log_q == -kInf) return 0.0;
  if (gamma == 0.0) return std::min(std::exp(log_q), cap);

  const auto phi = [&](double t) { return gamma * log_derivs(nl, t).df + t - log_q; };
  const auto dphi = [&](double t) { return gamma * log_derivs(nl, t).s_d2f + 1.0; };

  const double t_cap = std::isfinite(cap) ? std::log(cap) : kInf;
  if (std::isfinite(t_cap) && phi(t_cap) <= 0.0) return cap;

  // Bracket the root of the strictly increasing stationarity function.
  double t0 = std::min(log_q, t_cap);
  double lo = t0, hi = t0;
  if (phi(t0) > 0.0) {
    double step = 1.0;
    lo = t0 - step;
    while (phi(lo) > 0.0) {
      hi = lo;
      step *= 2.0;
      lo = t0 - step;
      if (step > 1e6) throw Error(ErrorKind::convergence, "kl_prox_cell: cannot bracket root");
    }
  } else {
    double step = 1.0;
    hi = std::min(t0 + step, t_cap);
    while (phi(hi) < 0.0) {
      lo = hi;
      step *= 2.0;
      hi = std::min(t0 + step, t_cap);
      if (step > 1e6) throw Error(ErrorKind::convergence, "kl_prox_cell: cannot bracket root");
    }
  }

  double t = 0.5 * (lo + hi);
  double res = phi(t);
  for (int it = 0; it < 200; ++it) {
    const double scale = 1.0 + std::abs(t) + std::abs(log_q) + gamma * std::abs(log_derivs(nl, t).df);
    if (std::abs(res) <= 1e-12 * scale || hi - lo <= 4e-16 * (1.0 + std::abs(t)))
      return std::min(std::exp(t), cap);
    if (res > 0.0) hi = t; else lo = t;
    double next = t - res / dphi(t);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
    res = phi(t);
  }
  throw Error(ErrorKind::convergence, "kl_prox_cell: root finding did not converge", res);
}

double kl_prox_cell(double q, double gamma, const Nonlinearity& nl, double cap) {
  if (!(q >= 0.0) || !std::isfinite(q))
    throw Error(ErrorKind::invalid_argument, fmt::format("kl_prox_cell: bad target {}", q));
  return kl_prox_cell_log(q == 0.0 ? -kInf : std::log(q), gamma, nl, cap);
}

}  // namespace ksjko
