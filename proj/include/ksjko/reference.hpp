#pragma once

#include <cstdint>

#include "ksjko/energy.hpp"
#include "ksjko/grid.hpp"
#include "ksjko/jko.hpp"

namespace ksjko {

struct FvConfig {
  double dt = 1e-5;
  double cfl_safety = 0.9;
};

/// Largest explicit time step allowed by the diffusion and drift limits,
/// min(h²/(2d max Ψ′(ρ)), h/(2 max|χ∇u|)), before the safety factor.
double fv_stable_dt(const DensityField& rho, double chi, const Nonlinearity& nl);

/// One conservative explicit step of ∂ₜρ + χ∇·(ρ∇u) − ΔΨ(ρ) = 0 with
/// upwind drift, centered diffusion and zero-flux walls (wrap-around on
/// periodic domains). Throws ErrorKind::parameter when dt breaks the CFL limit.
DensityField fv_explicit_step(const DensityField& rho, const FvConfig& cfg, double chi,
                              const Nonlinearity& nl);

/// Integrates to `horizon` with dt = safety × stable step (the last step is
/// shortened to land on the horizon). `max_dt` caps the step.
DensityField fv_run(const DensityField& rho0, double chi, const Nonlinearity& nl, double horizon,
                    double cfl_safety = 0.5, double max_dt = 1e-3);

/// m0 / (1 − χ m0 t). Throws ErrorKind::domain once χ m0 t ≥ 1.
double zero_diffusion_linf(double m0, double chi, double t);

/// W₂² between piecewise-constant densities on the same 1D grid from
///   2 ∫∫_{x<y} (F(x) − G(y))₊ + (G(x) − F(y))₊ dx dy,
/// integrated exactly cell pair by cell pair.
double w2_cdf_double_integral(const DensityField& a, const DensityField& b);

struct BruteForceResult {
  DensityField rho;
  double objective = 0.0;
  int evaluations = 0;
};

/// Direct minimization of J(ρ) + W₂²(ρ, g)/(2τ) over the capped simplex by
/// spectral projected gradient with finite-difference gradients, from
/// `starts` deterministic starting points (the first one is g). 1D, at
/// most 16 cells.
BruteForceResult brute_force_jko(const DensityField& g, const JkoConfig& cfg,
                                 const Nonlinearity& nl, int starts = 20,
                                 std::uint64_t seed = 12345);

/// Σ |a − b| h^d. Throws ErrorKind::invalid_argument on different grids.
double compare_l1(const DensityField& a, const DensityField& b);

}  // namespace ksjko
