#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ksjko/energy.hpp"
#include "ksjko/grid.hpp"
#include "ksjko/poisson.hpp"
#include "ksjko/transport.hpp"

namespace ksjko {

struct JkoConfig {
  double chi = 1.0;
  double tau = 1e-3;
  double lambda_monitor = 1.5;
  double eps0 = 0.05;
  double t0 = 0.0;
  /// Cap override; the default cap is 1/(χτ) (unbounded when χ = 0).
  std::optional<double> cap_M;
  /// Entropic regularization for 2D steps; 0 selects h².
  double entropic_eps = 0.0;
  double inner_tol = 1e-11;
  double fixed_point_tol = 1e-10;
  int max_inner_iters = 5000;
  int max_outer_iters = 200;
  /// Relaxation of the potential fixed point: ρ ← (1−θ)ρ + θ ρ_new.
  double damping = 1.0;
  /// Calibrated threshold for τχ‖g‖∞ (0 = not calibrated); warnings only.
  double c0_empirical = 0.0;
  /// Monitor slack relative to the inverse L∞ norm being tested.
  double monitor_slack_rel = 1e-3;
  /// Enforce χλt₀ < ‖ρ₀‖∞⁻¹ − ε₀ at the start of run_flow.
  bool check_hypothesis = true;

  double cap() const;
  /// Throws ErrorKind::parameter on nonsensical values.
  void validate() const;
};

struct LinfVerdict {
  double inv_prev = 0.0;
  double inv_new = 0.0;
  double required_inv = 0.0;  // ‖g‖⁻¹ − λτχ
  double required_linf = 0.0;  // its inverse, +∞ when the bound is void
  double slack_tol = 0.0;
  double X = 0.0;
  double Y = 0.0;
  bool per_step_pass = true;
  bool xy_pass = true;
  bool pass() const { return per_step_pass && xy_pass; }
};

struct StepReport {
  double linf = 0.0;
  double linf_bound_required = 0.0;
  double inv_linf = 0.0;
  double required_inv_linf_bound = 0.0;
  double monitor_X = 0.0;
  double monitor_Y = 0.0;
  std::size_t argmax_cell = 0;
  bool argmax_interior = true;
  bool monitor_pass = true;
  bool cumulative_pass = true;
  EnergyReport energy;
  double objective = 0.0;  // J(ρ) + W₂²(ρ, g)/(2τ)
  double w2_squared = 0.0;
  double entropic_bias = 0.0;
  /// J_prev − J_new − W₂²/τ.
  double dissipation_slack = 0.0;
  /// J_prev − J_new − W₂²/(2τ), the bound the minimization itself certifies.
  double dissipation_slack_half = 0.0;
  double kkt_residual = 0.0;
  double kkt_constant_c = 0.0;
  double pressure_max = 0.0;
  double complementarity_defect = 0.0;
  double active_fraction = 0.0;
  bool kkt_degenerate = false;
  double mass_defect = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double outer_residual = 0.0;
  bool above_c0 = false;
  bool non_monotone = false;
};

struct StepResult {
  DensityField rho;
  ScalarField u;
  TransportResult transport;  // from rho to g
  StepReport report;
};

/// One constrained minimizing-movement step from g:
///   min J(ρ) + W₂²(ρ, g)/(2τ)  subject to  0 ≤ ρ ≤ M, unit mass.
/// The interaction term is handled by refreshing a frozen potential; each
/// frozen subproblem is convex. 1D uses an exact Newton active-set solver
/// in cumulative-mass coordinates; 2D uses entropic generalized Sinkhorn.
StepResult jko_step(const DensityField& g, const JkoConfig& cfg, const Nonlinearity& nl);

/// J(ρ) + W₂²(ρ, g)/(2τ) with exact piecewise-constant W₂ (1D only).
double jko_objective_1d(const DensityField& rho, const DensityField& g, const JkoConfig& cfg,
                        const Nonlinearity& nl);

LinfVerdict linf_monitor(double prev_linf, double new_linf, const JkoConfig& cfg, int dimension);

/// J_prev − J_new − w2/τ.
double energy_dissipation_check(double J_prev, double J_new, double w2_squared, double tau);

struct KktReport {
  double residual = 0.0;
  double c = 0.0;
  ScalarField h;
  ScalarField pressure;
  double pressure_max = 0.0;
  double complementarity_defect = 0.0;
  double active_fraction = 0.0;
  bool degenerate = false;
};

/// h = f′(ρ) − χu + φ/τ on cells with ρ above the floor; c is the median of
/// h over uncapped cells; the residual is max |h − c| there divided by the
/// largest range among f′(ρ), χu and φ/τ.
KktReport kkt_residual(const DensityField& rho, const DensityField& g, const ScalarField& u,
                       const ScalarField& phi, const JkoConfig& cfg, const Nonlinearity& nl);

/// max over interior cells with positive neighbours of |ρ − g(T)·T′|.
double monge_ampere_residual_1d(const DensityField& rho, const DensityField& g,
                                const TransportResult& res);

struct VelocityField {
  int dimension = 1;
  std::array<ScalarField, 2> component;
};

/// v = (x − T(x))/τ per cell, using the mass-weighted map.
VelocityField velocity_field(const TransportResult& res, double tau);

/// max over interior cells with ρ above `floor` of |v − (−∇f′(ρ) + χ∇u)|
/// along the first axis, with centered differences.
double velocity_consistency_1d(const VelocityField& v, const DensityField& rho,
                               const ScalarField& u, double chi, const Nonlinearity& nl,
                               double floor = 1e-8);

enum class FlowStatus { completed, monitor_failed, solver_failed };
const char* to_string(FlowStatus s);

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityField> states;
  std::vector<StepReport> reports;          // reports[0] describes ρ₀
  std::vector<VelocityField> velocities;    // velocities[k−1] belongs to step k
  std::vector<TransportResult> transports;  // transports[k−1]: ρ_k → ρ_{k−1}
  std::vector<ScalarField> potentials;      // u(ρ_k)
  double tau = 0.0;
  FlowStatus status = FlowStatus::completed;
  int failed_step = -1;
  std::string message;
};

/// Number of steps floor(t₀/τ), robust to rounding of exact multiples.
int step_count(double t0, double tau);

/// Throws ErrorKind::configuration quoting the inequality unless
/// χλt₀ < ‖ρ₀‖∞⁻¹ − ε₀.
void check_start_hypothesis(const JkoConfig& cfg, double linf0);

/// Iterates jko_step up to t₀. Throws ErrorKind::configuration when the
/// hypothesis check is enabled and fails. Stops early on a monitor failure
/// or a solver error, recording the status.
Trajectory run_flow(const DensityField& rho0, const JkoConfig& cfg, const Nonlinearity& nl);

struct Interpolants {
  DensityField piecewise;
  DensityField geodesic;
};

/// Piecewise-constant and displacement interpolants at time t.
Interpolants trajectory_interpolate(const Trajectory& traj, double t);

/// Σ_k W₂²(ρ_k, ρ_{k−1})/τ.
double dissipation_sum(const Trajectory& traj);
/// ∫|ρ̂′|² dt of the geodesic interpolant (constant speed on each step).
double metric_action(const Trajectory& traj);

}  // namespace ksjko
