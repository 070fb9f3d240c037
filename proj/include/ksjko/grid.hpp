#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace ksjko {

/// How the chemoattractant potential is tied to the density.
enum class Coupling {
  dirichlet,          // -Δu = ρ, u = 0 on the boundary
  neumann_shifted,    // -Δu = ρ - 1/|Ω|, zero flux, mean-zero gauge
  neumann_helmholtz,  // -Δu + u = ρ, zero flux
  periodic,           // -Δu = ρ - 1/|Ω| on the torus, mean-zero gauge
  freespace,          // u = -U * ρ with the 2D log kernel
};

const char* to_string(Coupling c);
Coupling coupling_from_string(const std::string& s);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

struct DomainSpec {
  int dimension = 1;
  std::array<Interval, 2> extent{};
  Coupling coupling = Coupling::dirichlet;

  double volume() const;
  /// Throws on an unsupported dimension, empty extent or freespace in 1D.
  void validate() const;

  static DomainSpec interval(double lo, double hi, Coupling c = Coupling::dirichlet);
  static DomainSpec rectangle(Interval x, Interval y, Coupling c = Coupling::dirichlet);
};

/// Uniform cell-centered grid. Cells are numbered with x fastest.
class Grid {
 public:
  Grid() = default;
  Grid(const DomainSpec& domain, int cells_per_axis);

  const DomainSpec& domain() const { return domain_; }
  int dimension() const { return domain_.dimension; }
  int cells_per_axis() const { return n_; }
  std::size_t size() const { return size_; }
  double spacing(int axis = 0) const { return h_[axis]; }
  double cell_volume() const;

  std::array<int, 2> multi_index(std::size_t cell) const;
  std::size_t flat_index(int i, int j = 0) const;
  double center(std::size_t cell, int axis) const;
  std::array<double, 2> center(std::size_t cell) const;
  /// Left edge of cell `i` along `axis`.
  double edge(int i, int axis = 0) const;

  /// Cell `cell` lies in the outermost layer of the grid.
  bool on_boundary(std::size_t cell) const;
  /// Index of the mirror image of `cell` under reflection through the
  /// domain center along `axis`.
  std::size_t mirror(std::size_t cell, int axis = 0) const;

  bool same_as(const Grid& other) const;

 private:
  DomainSpec domain_{};
  int n_ = 0;
  std::size_t size_ = 0;
  std::array<double, 2> h_{};
};

/// Throws ErrorKind::invalid_resolution when n < 2.
Grid build_grid(const DomainSpec& domain, int n);

/// Per-cell real values on a grid.
struct ScalarField {
  Grid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0)
      : grid(g), values(g.size(), fill) {}
  ScalarField(const Grid& g, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

/// Cell-averaged density (per unit volume). Mass = Σ value · h^d.
struct DensityField {
  Grid grid;
  std::vector<double> values;

  DensityField() = default;
  explicit DensityField(const Grid& g, double fill = 0.0)
      : grid(g), values(g.size(), fill) {}
  DensityField(const Grid& g, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  /// Per-cell masses ρ_i h^d.
  std::vector<double> masses() const;
  static DensityField from_masses(const Grid& g, const std::vector<double>& masses);
};

double total_mass(const DensityField& rho);

struct LinfResult {
  double value = 0.0;
  std::size_t index = 0;  // lowest index among ties
};
LinfResult linf_norm(const DensityField& rho);

/// Σ |x_cell - domain centroid|² ρ h^d.
double second_moment(const DensityField& rho);

/// Throws ErrorKind::invalid_argument unless every value is finite and
/// nonnegative and the mass is 1 within `mass_tol`.
void validate_density(const DensityField& rho, double mass_tol = 1e-9);

/// Multiplies by a constant so the total mass is exactly one (to rounding).
DensityField normalized(DensityField rho);

/// Splits every cell into 2^d children with the parent's value.
DensityField refine_by_injection(const DensityField& rho);

/// max_i |ρ_i − ρ_mirror(i)| along `axis`.
double mirror_asymmetry(const DensityField& rho, int axis = 0);

}  // namespace ksjko
