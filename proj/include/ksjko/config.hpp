#pragma once

#include <string>
#include <vector>

#include "ksjko/energy.hpp"
#include "ksjko/grid.hpp"
#include "ksjko/jko.hpp"

namespace ksjko {

struct OutputSpec {
  std::string directory = "run";
  int stride = 10;
  std::vector<std::string> formats{"csv"};  // snapshot formats: csv, json
};

/// Sections and keys (defaults in brackets; * = required):
///   [domain]  dimension [1], x_min [0], x_max [1], y_min [0], y_max [1],
///             coupling [dirichlet], n *
///   [physics] chi *, nonlinearity [entropy], initial [uniform]
///   [scheme]  tau *, t0 *, lambda [1.5], eps0 [0.05], entropic_eps [0],
///             inner_tol [1e-11], fixed_point_tol [1e-10], max_inner_iters [5000],
///             max_outer_iters [200], cap [auto], damping [1], c0_empirical [0],
///             monitor_slack_rel [1e-3], check_hypothesis [true]
///   [output]  directory [run], stride [10], formats [csv]
struct RunConfig {
  DomainSpec domain;
  int n = 0;
  std::string nonlinearity = "entropy";
  std::string initial = "uniform";
  JkoConfig scheme;
  OutputSpec output;

  Grid grid() const;
  Nonlinearity parsed_nonlinearity() const;
  /// Unit-mass initial density.
  DensityField initial_density() const;
};

/// Parses an INI document. Throws ErrorKind::configuration naming the
/// offending key for unknown, duplicate, malformed or missing keys, and
/// for a violated start hypothesis χλt₀ < ‖ρ₀‖∞⁻¹ − ε₀ when checked.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical form: every key, fixed order, shortest round-trip numbers.
std::string serialize_config(const RunConfig& cfg);

/// Sets "section.key" from its text form, as in a config file.
void set_config_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

/// Range and consistency checks shared by parse_config and sweeps.
void check_config(const RunConfig& cfg);

}  // namespace ksjko
