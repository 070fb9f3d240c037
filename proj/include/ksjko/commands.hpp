#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ksjko/config.hpp"
#include "ksjko/jko.hpp"

namespace ksjko {

enum ExitCode { exit_ok = 0, exit_monitor = 1, exit_solver = 2, exit_config = 3 };

struct MonitorStatus {
  std::string name;
  bool pass = true;
  int first_failure = -1;  // step index, −1 when passing
  double worst = 0.0;
  bool gating = true;  // counts towards the exit status
};

struct RunOutcome {
  int exit_code = exit_ok;
  std::filesystem::path directory;
  Trajectory trajectory;
  std::vector<MonitorStatus> monitors;
  std::string message;
};

/// Output root: $KSJKO_OUTPUT_ROOT when set, else the working directory.
std::filesystem::path output_root();

/// Monitor verdicts over a finished trajectory: linf_per_step,
/// linf_cumulative, energy_dissipation, kkt, mass, nonnegativity, cap.
std::vector<MonitorStatus> evaluate_monitors(const Trajectory& traj, const JkoConfig& cfg);

/// Runs the flow and writes series.csv, snapshots and summary.json into
/// output_root()/cfg.output.directory.
RunOutcome cmd_run(const RunConfig& cfg);

/// One run per value of `dotted_key`, each in its own subdirectory.
/// Returns the largest exit code.
int cmd_sweep(const RunConfig& base, const std::string& dotted_key,
              const std::vector<std::string>& values);

void write_series(const Trajectory& traj, const std::filesystem::path& path);

/// Snapshot of step k: one row per cell with x[,y],rho,u.
void write_snapshot_csv(const DensityField& rho, const ScalarField& u,
                        const std::filesystem::path& path);
void write_snapshot_json(const DensityField& rho, const ScalarField& u, int k, double t,
                         const std::filesystem::path& path);

struct Snapshot {
  DensityField rho;
  ScalarField u;
};
/// Reads a CSV snapshot back onto `grid`.
Snapshot read_snapshot_csv(const std::filesystem::path& path, const Grid& grid);

/// snapshot_k000005.csv style name.
std::string snapshot_name(int k, const std::string& extension);

}  // namespace ksjko
