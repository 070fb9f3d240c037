#include "ksjko/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ksjko/error.hpp"

namespace ksjko {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, fmt::format("cannot write '{}'", path.string()));
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw Error(ErrorKind::io, fmt::format("write to '{}' failed", path.string()));
}

MonitorStatus fold(const std::string& name, const Trajectory& traj,
                   double (*violation)(const Trajectory&, std::size_t, const void*),
                   const void* ctx) {
  MonitorStatus m;
  m.name = name;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double v = violation(traj, k, ctx);
    m.worst = std::max(m.worst, v);
    if (v > 0.0 && m.pass) {
      m.pass = false;
      m.first_failure = int(k);
    }
  }
  return m;
}

struct Tolerances {
  double cap;
  double dissipation;
  double kkt;
};

}  // namespace

fs::path output_root() {
  if (const char* env = std::getenv("KSJKO_OUTPUT_ROOT"); env && *env) return fs::path(env);
  return fs::current_path();
}

std::string snapshot_name(int k, const std::string& extension) {
  return fmt::format("snapshot_k{:06d}.{}", k, extension);
}

std::vector<MonitorStatus> evaluate_monitors(const Trajectory& traj, const JkoConfig& cfg) {
  std::vector<MonitorStatus> out;
  if (traj.states.empty()) return out;
  const double J0 = traj.reports.front().energy.total;
  const Tolerances tol{cfg.cap(), 1e-6 * std::max(std::abs(J0), 1e-300), 1e-3};

  out.push_back(fold("linf_per_step", traj, [](const Trajectory& t, std::size_t k, const void*) {
    return t.reports[k].monitor_pass ? 0.0 : 1.0;
  }, nullptr));
  out.push_back(fold("linf_cumulative", traj, [](const Trajectory& t, std::size_t k, const void*) {
    return t.reports[k].cumulative_pass ? 0.0 : 1.0;
  }, nullptr));

  auto diss = fold("energy_dissipation", traj,
                   [](const Trajectory& t, std::size_t k, const void* c) {
                     if (k == 0) return 0.0;
                     const auto* tl = static_cast<const Tolerances*>(c);
                     return -t.reports[k].dissipation_slack - tl->dissipation;
                   }, &tol);
  double min_J = J0;
  for (const auto& r : traj.reports) min_J = std::min(min_J, r.energy.total);
  if (dissipation_sum(traj) > J0 - min_J + 1e-6 && diss.pass) {
    diss.pass = false;
    diss.first_failure = int(traj.states.size()) - 1;
  }
  // Entropic steps report a debiased W₂², not the exact one.
  diss.gating = traj.states.front().grid.dimension() == 1;
  out.push_back(diss);

  out.push_back(fold("kkt", traj, [](const Trajectory& t, std::size_t k, const void* c) {
    const auto* tl = static_cast<const Tolerances*>(c);
    return k == 0 ? 0.0 : t.reports[k].kkt_residual - tl->kkt;
  }, &tol));
  out.push_back(fold("mass", traj, [](const Trajectory& t, std::size_t k, const void*) {
    return std::abs(total_mass(t.states[k]) - 1.0) - 1e-9;
  }, nullptr));
  out.push_back(fold("nonnegativity", traj, [](const Trajectory& t, std::size_t k, const void*) {
    double mn = 0.0;
    for (double v : t.states[k].values) mn = std::min(mn, v);
    return -mn;
  }, nullptr));
  out.push_back(fold("cap", traj, [](const Trajectory& t, std::size_t k, const void* c) {
    const auto* tl = static_cast<const Tolerances*>(c);
    if (k == 0 || !std::isfinite(tl->cap)) return 0.0;
    return linf_norm(t.states[k]).value - tl->cap - 1e-12;
  }, &tol));
  return out;
}

void write_series(const Trajectory& traj, const fs::path& path) {
  auto out = open_out(path);
  out << "k,t,linf,inv_linf,required_inv_linf_bound,J,internal,interaction,w2_sq_over_tau,"
         "dissipation_slack,kkt_residual,active_fraction,monitor_pass\n";
  for (std::size_t k = 0; k < traj.reports.size(); ++k) {
    const auto& r = traj.reports[k];
    const double w2 = k == 0 ? 0.0 : r.w2_squared / traj.tau;
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},"
                       "{:.17g},{:.17g},{:.17g},{}\n",
                       k, traj.times[k], r.linf, r.inv_linf, r.required_inv_linf_bound,
                       r.energy.total, r.energy.internal, r.energy.interaction, w2,
                       r.dissipation_slack, r.kkt_residual, r.active_fraction,
                       r.monitor_pass && r.cumulative_pass ? 1 : 0);
  }
  close_out(out, path);
}

void write_snapshot_csv(const DensityField& rho, const ScalarField& u, const fs::path& path) {
  auto out = open_out(path);
  const int d = rho.grid.dimension();
  out << (d == 1 ? "x,rho,u\n" : "x,y,rho,u\n");
  for (std::size_t c = 0; c < rho.size(); ++c) {
    const auto x = rho.grid.center(c);
    if (d == 1) out << fmt::format("{:.17g},{:.17g},{:.17g}\n", x[0], rho[c], u[c]);
    else out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", x[0], x[1], rho[c], u[c]);
  }
  close_out(out, path);
}

void write_snapshot_json(const DensityField& rho, const ScalarField& u, int k, double t,
                         const fs::path& path) {
  nlohmann::ordered_json j;
  j["k"] = k;
  j["t"] = t;
  j["dimension"] = rho.grid.dimension();
  j["n"] = rho.grid.cells_per_axis();
  j["rho"] = rho.values;
  j["u"] = u.values;
  auto out = open_out(path);
  out << j.dump(1) << "\n";
  close_out(out, path);
}

Snapshot read_snapshot_csv(const fs::path& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, fmt::format("cannot read '{}'", path.string()));
  std::string line;
  std::getline(in, line);
  const int skip = grid.dimension();
  std::vector<double> rho, u;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(std::strtod(cell.c_str(), nullptr));
    if (int(cols.size()) != skip + 2)
      throw Error(ErrorKind::io, fmt::format("malformed snapshot row in '{}'", path.string()));
    rho.push_back(cols[skip]);
    u.push_back(cols[skip + 1]);
  }
  if (rho.size() != grid.size())
    throw Error(ErrorKind::io, fmt::format("snapshot '{}' has {} cells, grid has {}",
                                           path.string(), rho.size(), grid.size()));
  return {DensityField(grid, std::move(rho)), ScalarField(grid, std::move(u))};
}

RunOutcome cmd_run(const RunConfig& cfg) {
  RunOutcome res;
  const auto start = std::chrono::steady_clock::now();
  res.directory = output_root() / cfg.output.directory;
  fs::create_directories(res.directory);
  {
    auto out = open_out(res.directory / "config.ini");
    out << serialize_config(cfg);
    close_out(out, res.directory / "config.ini");
  }

  try {
    check_config(cfg);
    res.trajectory = run_flow(cfg.initial_density(), cfg.scheme, cfg.parsed_nonlinearity());
  } catch (const Error& e) {
    res.exit_code = e.kind() == ErrorKind::configuration || e.kind() == ErrorKind::parameter ||
                            e.kind() == ErrorKind::io
                        ? exit_config
                        : exit_solver;
    res.message = e.what();
  }
  const Trajectory& traj = res.trajectory;
  write_series(traj, res.directory / "series.csv");
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    if (int(k) % cfg.output.stride != 0) continue;
    for (const auto& f : cfg.output.formats) {
      if (f == "csv")
        write_snapshot_csv(traj.states[k], traj.potentials[k],
                           res.directory / snapshot_name(int(k), "csv"));
      else
        write_snapshot_json(traj.states[k], traj.potentials[k], int(k), traj.times[k],
                            res.directory / snapshot_name(int(k), "json"));
    }
  }

  if (res.exit_code == exit_ok) {
    res.monitors = evaluate_monitors(traj, cfg.scheme);
    if (traj.status == FlowStatus::solver_failed) {
      res.exit_code = exit_solver;
      res.message = traj.message;
    } else {
      bool ok = traj.status == FlowStatus::completed;
      for (const auto& m : res.monitors)
        if (m.gating && !m.pass) ok = false;
      if (!ok) {
        res.exit_code = exit_monitor;
        res.message = traj.message;
        if (res.message.empty())
          for (const auto& m : res.monitors)
            if (m.gating && !m.pass) {
              res.message = fmt::format("step {}: {} monitor failed", m.first_failure, m.name);
              break;
            }
      }
    }
  }

  nlohmann::ordered_json j;
  j["status"] = res.exit_code == exit_config ? "config_failed" : to_string(traj.status);
  j["exit_code"] = res.exit_code;
  j["message"] = res.message;
  j["steps"] = traj.states.empty() ? 0 : int(traj.states.size()) - 1;
  j["final_time"] = traj.times.empty() ? 0.0 : traj.times.back();
  j["failed_step"] = traj.failed_step;
  auto& mons = j["monitors"];
  mons = nlohmann::ordered_json::object();
  for (const auto& m : res.monitors)
    mons[m.name] = {{"pass", m.pass},
                    {"first_failure", m.first_failure},
                    {"worst", m.worst},
                    {"gating", m.gating}};
  if (!traj.states.empty()) {
    j["dissipation_sum"] = dissipation_sum(traj);
    j["metric_action"] = metric_action(traj);
  }
  j["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto out = open_out(res.directory / "summary.json");
  out << j.dump(2) << "\n";
  close_out(out, res.directory / "summary.json");
  return res;
}

int cmd_sweep(const RunConfig& base, const std::string& dotted_key,
              const std::vector<std::string>& values) {
  if (values.empty()) throw Error(ErrorKind::configuration, dotted_key + ": no sweep values");
  int worst = exit_ok;
  for (const auto& v : values) {
    RunConfig cfg = base;
    set_config_value(cfg, dotted_key, v);
    cfg.output.directory = (fs::path(base.output.directory) / (dotted_key + "=" + v)).string();
    worst = std::max(worst, cmd_run(cfg).exit_code);
  }
  return worst;
}

}  // namespace ksjko
