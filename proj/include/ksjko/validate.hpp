#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ksjko {

struct SuiteResult {
  std::string name;
  bool pass = true;
  std::vector<std::string> failures;
  std::vector<std::string> notes;
  double seconds = 0.0;
};

struct CalibrationRow {
  double v = 0.0;  // τχ‖g‖∞
  int runs = 0;
  int passes = 0;
  double pass_rate() const { return runs ? double(passes) / runs : 0.0; }
  double worst_margin = 0.0;  // min over runs of inv_new − required (negative = fail)
};

struct CalibrationTable {
  double lambda = 1.1;
  std::vector<CalibrationRow> rows;
  double c0_empirical = 0.0;  // largest v with every run passing at v and below
  bool monotone = true;       // pass rate nonincreasing in v
};

struct ValidateReport {
  std::vector<SuiteResult> suites;
  CalibrationTable calibration;
  bool calibrated = false;
  int exit_code = 0;
};

SuiteResult suite_oracle();
SuiteResult suite_poisson();
SuiteResult suite_transport();
SuiteResult suite_monitor();
/// One step per fixture and v, judged by the per-step monitor at λ.
CalibrationTable calibration_sweep(const std::vector<double>& v_grid, double lambda = 1.1);
std::vector<double> default_calibration_grid();

void write_calibration_csv(const CalibrationTable& table, const std::filesystem::path& path);

/// suite ∈ {oracle, poisson, transport, monitor, calibration, all}. Writes
/// calibration.csv into `directory` when the calibration suite runs.
/// Throws ErrorKind::configuration on an unknown suite name.
ValidateReport cmd_validate(const std::string& suite, const std::filesystem::path& directory);

}  // namespace ksjko
