#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "ksjko/error.hpp"
#include "ksjko/jko.hpp"

namespace ksjko {

const char* to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::completed: return "completed";
    case FlowStatus::monitor_failed: return "monitor_failed";
    case FlowStatus::solver_failed: return "solver_failed";
  }
  return "?";
}

int step_count(double t0, double tau) {
  return int(std::floor(t0 / tau * (1.0 + 1e-12) + 1e-12));
}

void check_start_hypothesis(const JkoConfig& cfg, double linf0) {
  if (!(cfg.chi * cfg.lambda_monitor * cfg.t0 < 1.0 / linf0 - cfg.eps0))
    throw Error(ErrorKind::configuration,
                fmt::format("hypothesis chi*lambda*t0 < 1/||rho0||_inf - eps0 fails: "
                            "{} * {} * {} = {} is not below {} - {} = {}",
                            cfg.chi, cfg.lambda_monitor, cfg.t0,
                            cfg.chi * cfg.lambda_monitor * cfg.t0, 1.0 / linf0, cfg.eps0,
                            1.0 / linf0 - cfg.eps0));
}

Trajectory run_flow(const DensityField& rho0, const JkoConfig& cfg, const Nonlinearity& nl) {
  cfg.validate();
  validate_density(rho0, 1e-9);
  const double linf0 = linf_norm(rho0).value;
  if (cfg.check_hypothesis) check_start_hypothesis(cfg, linf0);

  Trajectory traj;
  traj.tau = cfg.tau;
  traj.times.push_back(0.0);
  traj.states.push_back(rho0);
  {
    StepReport r0;
    const auto lr = linf_norm(rho0);
    r0.linf = lr.value;
    r0.argmax_cell = lr.index;
    r0.argmax_interior = !rho0.grid.on_boundary(lr.index);
    r0.inv_linf = 1.0 / lr.value;
    r0.required_inv_linf_bound = 1.0 / lr.value;
    r0.linf_bound_required = lr.value;
    const auto ps = solve_potential(rho0);
    r0.energy = total_energy(rho0, nl, cfg.chi, ps);
    r0.objective = r0.energy.total;
    r0.active_fraction = 0.0;
    traj.reports.push_back(r0);
    traj.potentials.push_back(ps.u);
  }

  const int steps = step_count(cfg.t0, cfg.tau);
  const double inv0 = 1.0 / linf0;
  for (int k = 1; k <= steps; ++k) {
    StepResult step;
    try {
      step = jko_step(traj.states.back(), cfg, nl);
    } catch (const Error& e) {
      traj.status = FlowStatus::solver_failed;
      traj.failed_step = k;
      traj.message = fmt::format("step {}: {} ({})", k, e.what(), to_string(e.kind()));
      break;
    }
    auto& r = step.report;
    const double cumulative = inv0 - cfg.lambda_monitor * k * cfg.tau * cfg.chi;
    r.cumulative_pass = r.inv_linf >= cumulative - cfg.monitor_slack_rel * inv0;
    traj.times.push_back(k * cfg.tau);
    traj.velocities.push_back(velocity_field(step.transport, cfg.tau));
    traj.transports.push_back(std::move(step.transport));
    traj.potentials.push_back(std::move(step.u));
    traj.states.push_back(std::move(step.rho));
    traj.reports.push_back(r);
    if (!r.monitor_pass || !r.cumulative_pass) {
      traj.status = FlowStatus::monitor_failed;
      traj.failed_step = k;
      traj.message = fmt::format(
          "step {}: {} bound failed (1/linf = {:.6g}, required {:.6g})", k,
          r.monitor_pass ? "cumulative" : "per-step", r.inv_linf,
          r.monitor_pass ? cumulative : r.required_inv_linf_bound);
      break;
    }
  }
  return traj;
}

Interpolants trajectory_interpolate(const Trajectory& traj, double t) {
  if (traj.states.empty()) throw Error(ErrorKind::parameter, "empty trajectory");
  const double last = traj.times.back();
  if (!(t >= 0.0 && t <= last + 1e-12 * std::max(1.0, last)))
    throw Error(ErrorKind::parameter, fmt::format("time {} outside [0, {}]", t, last));
  if (traj.states.size() == 1 || t <= 0.0) return {traj.states.front(), traj.states.front()};
  const double tau = traj.tau;
  int k = int(std::ceil(t / tau - 1e-9));
  k = std::clamp(k, 1, int(traj.states.size()) - 1);
  const double s = std::clamp((k * tau - t) / tau, 0.0, 1.0);
  Interpolants out;
  out.piecewise = traj.states[k];
  out.geodesic = displacement_interpolate(traj.transports[k - 1], traj.states[k], s);
  return out;
}

double dissipation_sum(const Trajectory& traj) {
  double s = 0.0;
  for (std::size_t k = 1; k < traj.reports.size(); ++k) s += traj.reports[k].w2_squared / traj.tau;
  return s;
}

double metric_action(const Trajectory& traj) {
  double s = 0.0;
  for (const auto& tr : traj.transports) {
    const double speed = std::sqrt(tr.w2_squared) / traj.tau;
    s += speed * speed * traj.tau;
  }
  return s;
}

}  // namespace ksjko
