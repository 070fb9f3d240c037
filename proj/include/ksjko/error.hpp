#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace ksjko {

enum class ErrorKind {
  invalid_resolution,
  invalid_argument,
  domain,
  parameter,
  marginal,
  convergence,
  solver,
  size,
  configuration,
  io,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind` tells callers which
/// contract was broken and `residual` carries the last solver residual when
/// one is meaningful (NaN otherwise).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what,
        double residual = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), kind_(kind), residual_(residual) {}

  ErrorKind kind() const noexcept { return kind_; }
  double residual() const noexcept { return residual_; }

 private:
  ErrorKind kind_;
  double residual_;
};

}  // namespace ksjko
