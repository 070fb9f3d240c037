#pragma once

#include "ksjko/grid.hpp"

namespace ksjko {

struct PotentialSolve {
  ScalarField u;
  double residual = 0.0;  // ‖L u − rhs‖∞ for stencil-based variants
  Coupling variant = Coupling::dirichlet;
};

struct PoissonOptions {
  double cg_rel_tol = 1e-10;
  int cg_max_iters = 20000;
};

/// Chemoattractant potential for the coupling in ρ's domain.
///
/// Finite-volume stencils use ghost values half a cell outside the wall, so
/// Dirichlet walls sit exactly on the boundary. 1D variants are solved
/// directly; 2D stencil variants use Jacobi-preconditioned CG; periodic
/// uses a discrete Fourier diagonalization; freespace sums the log kernel.
PotentialSolve solve_potential(const DensityField& rho, const PoissonOptions& opts = {});

/// Discrete −Δu (plus u for the Helmholtz variant) with the domain's
/// boundary treatment. Freespace uses the zero-flux stencil.
ScalarField laplacian_apply(const ScalarField& u, const DomainSpec& domain);
ScalarField laplacian_apply(const ScalarField& u);

/// Σ over faces of (difference quotient)² times the face's control volume.
/// Boundary faces follow the variant (ghost at h/2 for Dirichlet, none for
/// zero-flux walls, wrap-around for periodic).
double dirichlet_energy(const ScalarField& u);

/// Energy E with δE/δ(cell mass) = 2u for the coupling: Dirichlet energy,
/// plus ∫u² for Helmholtz, and Σ ρ u h^d (= −H) for freespace.
double coupling_energy(const PotentialSolve& potential, const DensityField& rho);

/// Log kernel U(z) = (1/2π) log|z|; the self term averages U over the disk
/// with the cell's area.
double freespace_kernel(double dx, double dy, double cell_area);

/// H(ρ) = Σ_ij ρ_i ρ_j U(x_i − x_j) h^{2d}.
double freespace_interaction(const DensityField& rho);

}  // namespace ksjko
