#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace ksjko::detail {

// Cumulative masses at the n+1 cell edges, kept from both ends so that
// differences of nearby breakpoints stay accurate in either tail.
struct CumulativeMass {
  std::vector<double> lo;  // mass left of edge k
  std::vector<double> hi;  // mass right of edge k
  double total = 0.0;

  static CumulativeMass from_masses(const std::vector<double>& m, double scale = 1.0) {
    CumulativeMass c;
    const std::size_t n = m.size();
    c.lo.assign(n + 1, 0.0);
    c.hi.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) c.lo[i + 1] = c.lo[i] + m[i] * scale;
    for (std::size_t i = n; i-- > 0;) c.hi[i] = c.hi[i + 1] + m[i] * scale;
    c.total = c.lo[n];
    return c;
  }

  std::size_t cells() const { return lo.size() - 1; }
  bool left_side(std::size_t k) const { return lo[k] <= hi[k]; }

  double cell(std::size_t i) const {
    return left_side(i + 1) ? lo[i + 1] - lo[i] : hi[i] - hi[i + 1];
  }

  void shift(std::size_t k, double delta) {
    lo[k] += delta;
    hi[k] -= delta;
  }
};

// lo_a[i] − lo_b[j], evaluated from whichever end both are close to.
inline double offset(const CumulativeMass& a, std::size_t i, const CumulativeMass& b,
                     std::size_t j) {
  if (a.left_side(i) || b.left_side(j)) return a.lo[i] - b.lo[j];
  return b.hi[j] - a.hi[i];
}

// Walks the monotone coupling of two piecewise-constant measures with equal
// totals. For each piece calls fn(i, j, u0, u1, v0, v1, mass): source cell
// i on fractions [u0, u1], target cell j on [v0, v1]. Source cells without
// mass produce one piece with u0 = 0, u1 = 1, v0 = v1 and mass 0.
template <class Fn>
void for_each_piece(const CumulativeMass& src, const CumulativeMass& dst, Fn&& fn) {
  const std::size_t n = src.cells(), nt = dst.cells();
  std::vector<std::size_t> positive;
  std::vector<double> bmass(nt);
  for (std::size_t j = 0; j < nt; ++j) {
    bmass[j] = dst.cell(j);
    if (bmass[j] > 0.0) positive.push_back(j);
  }
  if (positive.empty()) return;
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = src.cell(i);
    while (p + 1 < positive.size() && offset(src, i, dst, positive[p] + 1) >= 0.0) ++p;
    if (a <= 0.0) {
      const std::size_t j = positive[p];
      const double v = std::clamp(offset(src, i, dst, j) / bmass[j], 0.0, 1.0);
      fn(i, j, 0.0, 1.0, v, v, 0.0);
      continue;
    }
    std::size_t q = p;
    double u0 = 0.0;
    while (u0 < 1.0) {
      const std::size_t j = positive[q];
      const double b = bmass[j];
      const bool last = q + 1 == positive.size();
      const double u1 = last ? 1.0 : std::min(1.0, -offset(src, i, dst, j + 1) / a);
      if (u1 > u0) {
        const double off = offset(src, i, dst, j);
        const double v0 = std::clamp((off + a * u0) / b, 0.0, 1.0);
        const double v1 = std::clamp((off + a * u1) / b, 0.0, 1.0);
        fn(i, j, u0, u1, v0, v1, a * (u1 - u0));
      }
      u0 = std::max(u0, u1);
      if (u0 < 1.0) ++q;
    }
  }
}

}  // namespace ksjko::detail
