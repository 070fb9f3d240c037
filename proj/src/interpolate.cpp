#include <algorithm>
#include <cmath>

#include "ksjko/error.hpp"
#include "ksjko/transport.hpp"

namespace ksjko {

namespace {

// Spreads `mass` uniformly over [p0, p1] along one axis (a point when
// p0 == p1) and returns per-cell fractions through `emit`.
template <class Emit>
void deposit_interval(const Grid& g, int axis, double p0, double p1, Emit&& emit) {
  const double lo = g.domain().extent[axis].lo;
  const double h = g.spacing(axis);
  const int n = g.cells_per_axis();
  const double hi = lo + n * h;
  p0 = std::clamp(p0, lo, hi);
  p1 = std::clamp(p1, lo, hi);
  const auto cell_of = [&](double p) { return std::clamp(int(std::floor((p - lo) / h)), 0, n - 1); };
  const double len = p1 - p0;
  if (len <= 1e-14 * h) {
    emit(cell_of(0.5 * (p0 + p1)), 1.0);
    return;
  }
  const int c0 = cell_of(p0), c1 = cell_of(p1);
  for (int c = c0; c <= c1; ++c) {
    const double a = std::max(p0, lo + c * h), b = std::min(p1, lo + (c + 1) * h);
    if (b > a) emit(c, (b - a) / len);
  }
}

// Cell-sized box centered at p, shifted inside the domain.
template <class Emit>
void deposit_box(const Grid& g, int axis, double p, Emit&& emit) {
  const double lo = g.domain().extent[axis].lo;
  const double h = g.spacing(axis);
  const int n = g.cells_per_axis();
  p = std::clamp(p, lo + 0.5 * h, lo + (n - 0.5) * h);
  const double r = (p - lo) / h - 0.5;
  const int c = std::clamp(int(std::floor(r)), 0, n - 1);
  const double w = r - c;
  if (c + 1 < n && w > 0.0) {
    emit(c, 1.0 - w);
    emit(c + 1, w);
  } else {
    emit(c, 1.0);
  }
}

}  // namespace

DensityField displacement_interpolate(const TransportResult& res, const DensityField& source,
                                      double s) {
  if (!(s >= 0.0 && s <= 1.0))
    throw Error(ErrorKind::parameter, "interpolation parameter must lie in [0, 1]");
  const Grid& g = source.grid;
  std::vector<double> mass(g.size(), 0.0);

  if (!res.segments.empty()) {
    for (const auto& seg : res.segments) {
      if (seg.mass <= 0.0) continue;
      const double p0 = (1.0 - s) * seg.x0 + s * seg.t0;
      const double p1 = (1.0 - s) * seg.x1 + s * seg.t1;
      deposit_interval(g, 0, p0, p1, [&](int c, double frac) { mass[c] += frac * seg.mass; });
    }
    return DensityField::from_masses(g, mass);
  }

  const Grid& tg = res.target.grid;
  for (const auto& e : res.plan) {
    const auto x = res.source.grid.center(e.source);
    const auto y = tg.center(e.target);
    if (g.dimension() == 1) {
      deposit_box(g, 0, (1.0 - s) * x[0] + s * y[0],
                  [&](int c, double w) { mass[g.flat_index(c)] += w * e.mass; });
    } else {
      deposit_box(g, 0, (1.0 - s) * x[0] + s * y[0], [&](int cx, double wx) {
        deposit_box(g, 1, (1.0 - s) * x[1] + s * y[1], [&](int cy, double wy) {
          mass[g.flat_index(cx, cy)] += wx * wy * e.mass;
        });
      });
    }
  }
  return DensityField::from_masses(g, mass);
}

}  // namespace ksjko
