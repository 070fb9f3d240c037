#pragma once

#include <span>
#include <vector>

#include "ksjko/error.hpp"

namespace ksjko::detail {

// Thomas algorithm. sub[i] couples row i to i-1 (sub[0] unused), sup[i]
// couples row i to i+1 (sup[n-1] unused). No pivoting: callers pass
// diagonally dominant or SPD systems.
inline std::vector<double> solve_tridiagonal(std::span<const double> sub,
                                             std::span<const double> diag,
                                             std::span<const double> sup,
                                             std::span<const double> rhs) {
  const std::size_t n = diag.size();
  std::vector<double> c(n), d(n), x(n);
  if (n == 0) return x;
  double beta = diag[0];
  if (beta == 0.0) throw Error(ErrorKind::solver, "singular tridiagonal system");
  c[0] = n > 1 ? sup[0] / beta : 0.0;
  d[0] = rhs[0] / beta;
  for (std::size_t i = 1; i < n; ++i) {
    beta = diag[i] - sub[i] * c[i - 1];
    if (beta == 0.0) throw Error(ErrorKind::solver, "singular tridiagonal system");
    c[i] = i + 1 < n ? sup[i] / beta : 0.0;
    d[i] = (rhs[i] - sub[i] * d[i - 1]) / beta;
  }
  x[n - 1] = d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

}  // namespace ksjko::detail
