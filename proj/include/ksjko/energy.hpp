#pragma once

#include <memory>
#include <string>

#include "ksjko/grid.hpp"

namespace ksjko {

struct PotentialSolve;

/// Internal-energy law f on t >= 0.
///
/// Kinds:
///  - entropy:      f(t) = t log t
///  - power(m):     f(t) = t^m / (m - 1), m > 1
///  - none:         f(t) = 0; only meaningful as the base of a regularized law
///  - regularized:  f(t) = base(t) + δ t log t
class Nonlinearity {
 public:
  enum class Kind { entropy, power, none, regularized };

  static Nonlinearity entropy();
  static Nonlinearity power(double m);
  static Nonlinearity none();
  static Nonlinearity regularized(const Nonlinearity& base, double delta);

  /// Accepts "entropy", "power:m=<val>", "none" and
  /// "regularized:base=<spec>,delta=<val>" (base may itself be "power:m=2").
  static Nonlinearity parse(const std::string& spec);
  std::string to_string() const;

  Kind kind() const { return kind_; }
  double exponent() const { return m_; }
  double delta() const { return delta_; }
  const Nonlinearity* base() const { return base_.get(); }

  /// f'(0) = -∞; true whenever an entropy term is present.
  bool log_singular() const;
  /// f grows faster than linearly (rules out the bare `none` law).
  bool superlinear() const;

 private:
  Kind kind_ = Kind::entropy;
  double m_ = 0.0;
  double delta_ = 0.0;
  std::shared_ptr<const Nonlinearity> base_;
};

struct FDerivatives {
  double f = 0.0;
  double df = 0.0;   // -∞ at t = 0 for log-singular laws
  double d2f = 0.0;  // +∞ at t = 0 when singular
};

/// Throws ErrorKind::domain for t < 0.
FDerivatives f_derivatives(const Nonlinearity& nl, double t);

/// Ψ(t) = t f'(t) - f(t), with Ψ(0) = 0.
double psi_eval(const Nonlinearity& nl, double t);
/// Ψ'(t) = t f''(t), the diffusion coefficient.
double psi_prime(const Nonlinearity& nl, double t);

struct EnergyReport {
  double internal = 0.0;
  double interaction = 0.0;
  double total = 0.0;
};

/// J(ρ) = Σ f(ρ) h^d - (χ/2) E(u), where E is the discrete energy whose
/// first variation with respect to cell mass is 2u (Dirichlet energy on
/// bounded domains, -H(ρ) in freespace), so δJ = f′(ρ) − χu.
EnergyReport total_energy(const DensityField& rho, const Nonlinearity& nl, double chi);
EnergyReport total_energy(const DensityField& rho, const Nonlinearity& nl, double chi,
                          const PotentialSolve& potential);

/// Internal energy only.
double internal_energy(const DensityField& rho, const Nonlinearity& nl);

/// argmin over s in [0, M] of γ f(s) + s log(s/q) - s + q.
double kl_prox_cell(double q, double gamma, const Nonlinearity& nl, double cap);
/// Same map with the target given as log q, for targets far outside the
/// double range (log q = -∞ means q = 0).
double kl_prox_cell_log(double log_q, double gamma, const Nonlinearity& nl, double cap);

}  // namespace ksjko
