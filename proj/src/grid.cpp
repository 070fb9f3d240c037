#include "ksjko/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "ksjko/error.hpp"

namespace ksjko {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_resolution: return "invalid-resolution";
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::domain: return "domain";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::marginal: return "marginal";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::solver: return "solver";
    case ErrorKind::size: return "size";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

const char* to_string(Coupling c) {
  switch (c) {
    case Coupling::dirichlet: return "dirichlet";
    case Coupling::neumann_shifted: return "neumann_shifted";
    case Coupling::neumann_helmholtz: return "neumann_helmholtz";
    case Coupling::periodic: return "periodic";
    case Coupling::freespace: return "freespace";
  }
  return "unknown";
}

Coupling coupling_from_string(const std::string& s) {
  for (auto c : {Coupling::dirichlet, Coupling::neumann_shifted, Coupling::neumann_helmholtz,
                 Coupling::periodic, Coupling::freespace}) {
    if (s == to_string(c)) return c;
  }
  throw Error(ErrorKind::invalid_argument, fmt::format("unknown coupling '{}'", s));
}

double DomainSpec::volume() const {
  double v = 1.0;
  for (int a = 0; a < dimension; ++a) v *= extent[a].length();
  return v;
}

void DomainSpec::validate() const {
  if (dimension != 1 && dimension != 2)
    throw Error(ErrorKind::invalid_argument,
                fmt::format("dimension must be 1 or 2, got {}", dimension));
  for (int a = 0; a < dimension; ++a) {
    if (!(extent[a].hi > extent[a].lo) || !std::isfinite(extent[a].length()))
      throw Error(ErrorKind::invalid_argument, fmt::format("empty extent on axis {}", a));
  }
  if (coupling == Coupling::freespace && dimension != 2)
    throw Error(ErrorKind::invalid_argument, "freespace coupling is only built for d = 2");
}

DomainSpec DomainSpec::interval(double lo, double hi, Coupling c) {
  DomainSpec d;
  d.dimension = 1;
  d.extent[0] = {lo, hi};
  d.extent[1] = {0.0, 1.0};
  d.coupling = c;
  return d;
}

DomainSpec DomainSpec::rectangle(Interval x, Interval y, Coupling c) {
  DomainSpec d;
  d.dimension = 2;
  d.extent = {x, y};
  d.coupling = c;
  return d;
}

Grid::Grid(const DomainSpec& domain, int cells_per_axis) : domain_(domain), n_(cells_per_axis) {
  domain_.validate();
  if (cells_per_axis < 2)
    throw Error(ErrorKind::invalid_resolution,
                fmt::format("need at least 2 cells per axis, got {}", cells_per_axis));
  size_ = domain_.dimension == 1 ? std::size_t(n_) : std::size_t(n_) * std::size_t(n_);
  for (int a = 0; a < domain_.dimension; ++a) h_[a] = domain_.extent[a].length() / n_;
  if (domain_.dimension == 1) h_[1] = 1.0;
}

double Grid::cell_volume() const {
  return dimension() == 1 ? h_[0] : h_[0] * h_[1];
}

std::array<int, 2> Grid::multi_index(std::size_t cell) const {
  if (dimension() == 1) return {int(cell), 0};
  return {int(cell % std::size_t(n_)), int(cell / std::size_t(n_))};
}

std::size_t Grid::flat_index(int i, int j) const {
  return dimension() == 1 ? std::size_t(i) : std::size_t(j) * std::size_t(n_) + std::size_t(i);
}

double Grid::center(std::size_t cell, int axis) const {
  const auto ij = multi_index(cell);
  return domain_.extent[axis].lo + (ij[axis] + 0.5) * h_[axis];
}

std::array<double, 2> Grid::center(std::size_t cell) const {
  return {center(cell, 0), dimension() == 2 ? center(cell, 1) : 0.0};
}

double Grid::edge(int i, int axis) const { return domain_.extent[axis].lo + i * h_[axis]; }

bool Grid::on_boundary(std::size_t cell) const {
  const auto ij = multi_index(cell);
  for (int a = 0; a < dimension(); ++a)
    if (ij[a] == 0 || ij[a] == n_ - 1) return true;
  return false;
}

std::size_t Grid::mirror(std::size_t cell, int axis) const {
  auto ij = multi_index(cell);
  ij[axis] = n_ - 1 - ij[axis];
  return flat_index(ij[0], ij[1]);
}

bool Grid::same_as(const Grid& other) const {
  if (dimension() != other.dimension() || n_ != other.n_) return false;
  for (int a = 0; a < dimension(); ++a) {
    if (domain_.extent[a].lo != other.domain_.extent[a].lo ||
        domain_.extent[a].hi != other.domain_.extent[a].hi)
      return false;
  }
  return true;
}

Grid build_grid(const DomainSpec& domain, int n) { return Grid(domain, n); }

ScalarField::ScalarField(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.size())
    throw Error(ErrorKind::invalid_argument, "scalar field size does not match grid");
}

DensityField::DensityField(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.size())
    throw Error(ErrorKind::invalid_argument, "density size does not match grid");
}

std::vector<double> DensityField::masses() const {
  const double vol = grid.cell_volume();
  std::vector<double> m(values.size());
  std::transform(values.begin(), values.end(), m.begin(), [vol](double v) { return v * vol; });
  return m;
}

DensityField DensityField::from_masses(const Grid& g, const std::vector<double>& masses) {
  const double vol = g.cell_volume();
  std::vector<double> v(masses.size());
  std::transform(masses.begin(), masses.end(), v.begin(), [vol](double m) { return m / vol; });
  return DensityField(g, std::move(v));
}

double total_mass(const DensityField& rho) {
  double s = 0.0;
  for (double v : rho.values) s += v;
  return s * rho.grid.cell_volume();
}

LinfResult linf_norm(const DensityField& rho) {
  LinfResult r;
  if (rho.values.empty()) return r;
  r.value = rho.values[0];
  for (std::size_t i = 1; i < rho.values.size(); ++i) {
    if (rho.values[i] > r.value) {
      r.value = rho.values[i];
      r.index = i;
    }
  }
  return r;
}

double second_moment(const DensityField& rho) {
  const auto& dom = rho.grid.domain();
  const int d = rho.grid.dimension();
  std::array<double, 2> c{};
  for (int a = 0; a < d; ++a) c[a] = 0.5 * (dom.extent[a].lo + dom.extent[a].hi);
  double s = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double dx = rho.grid.center(i, a) - c[a];
      r2 += dx * dx;
    }
    s += r2 * rho.values[i];
  }
  return s * rho.grid.cell_volume();
}

void validate_density(const DensityField& rho, double mass_tol) {
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (!std::isfinite(rho.values[i]) || rho.values[i] < 0.0)
      throw Error(ErrorKind::invalid_argument,
                  fmt::format("density value {} at cell {} is not a finite nonnegative number",
                              rho.values[i], i));
  }
  const double m = total_mass(rho);
  if (std::abs(m - 1.0) > mass_tol)
    throw Error(ErrorKind::invalid_argument,
                fmt::format("density has mass {:.17g}, expected 1", m));
}

DensityField normalized(DensityField rho) {
  const double m = total_mass(rho);
  if (!(m > 0.0)) throw Error(ErrorKind::invalid_argument, "cannot normalize a zero density");
  for (double& v : rho.values) v /= m;
  return rho;
}

DensityField refine_by_injection(const DensityField& rho) {
  const Grid fine(rho.grid.domain(), 2 * rho.grid.cells_per_axis());
  DensityField out(fine);
  for (std::size_t c = 0; c < fine.size(); ++c) {
    const auto ij = fine.multi_index(c);
    out.values[c] = rho.values[rho.grid.flat_index(ij[0] / 2, ij[1] / 2)];
  }
  return out;
}

double mirror_asymmetry(const DensityField& rho, int axis) {
  double worst = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i)
    worst = std::max(worst, std::abs(rho.values[i] - rho.values[rho.grid.mirror(i, axis)]));
  return worst;
}

}  // namespace ksjko
