#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "ksjko/grid.hpp"

namespace ksjko {

/// How a cell-averaged density is read as a measure.
///  - piecewise_constant: uniform density inside each cell (piecewise-linear CDF)
///  - atomic: each cell's mass sits at its center
enum class MeasureModel { piecewise_constant, atomic };
enum class TransportMethod { quantile, entropic, lp };

const char* to_string(TransportMethod m);

struct PlanEntry {
  std::size_t source = 0;
  std::size_t target = 0;
  double mass = 0.0;
};

/// One piece of a 1D monotone map on which T is affine. `mass` is the
/// source mass carried; x0 < x1 always. A cell without mass is one piece
/// of mass 0 with constant T.
struct MapSegment {
  double x0 = 0.0, x1 = 0.0;
  double t0 = 0.0, t1 = 0.0;
  double mass = 0.0;
  std::size_t source_cell = 0;
  std::size_t target_cell = 0;
};

struct TransportResult {
  double w2_squared = 0.0;
  /// ⟨C, π⟩ of the returned plan; equals w2_squared for exact methods.
  double transport_cost = 0.0;
  TransportMethod method = TransportMethod::quantile;
  MeasureModel model = MeasureModel::piecewise_constant;
  double epsilon = 0.0;
  /// Per source cell, the mass-weighted mean target coordinate per axis.
  /// Cells without mass carry T at their center in the 1D piecewise-constant
  /// model and their own center otherwise.
  std::array<std::vector<double>, 2> map_T;
  std::vector<PlanEntry> plan;
  std::vector<MapSegment> segments;  // 1D piecewise-constant only
  /// Kantorovich potential for cost |x−y|²/2 (cell averages in the
  /// piecewise-constant model, values at atoms otherwise).
  ScalarField phi;
  DensityField source;
  DensityField target;
  double marginal_defect = 0.0;
  int iterations = 0;
};

/// Exact 1D transport through quantile functions. Throws
/// ErrorKind::marginal when the masses differ by more than `mass_tol`.
TransportResult w2_quantile_1d(const DensityField& rho, const DensityField& g,
                               MeasureModel model = MeasureModel::piecewise_constant,
                               double mass_tol = 1e-9);

/// T(x) for a 1D piecewise-constant result (the right limit at jumps).
double transport_map_at(const TransportResult& res, double x);

/// φ with φ′ = x − T(x), φ(left end) = 0.
ScalarField kantorovich_potential_1d(const TransportResult& res);

/// Exact discrete transport between the atomic measures by successive
/// shortest paths. At most 64 cells per field.
TransportResult lp_transport_oracle(const DensityField& rho, const DensityField& g);

struct SinkhornOptions {
  double marginal_tol = 1e-12;  // L1 gap of the unrounded plan
  int max_iters = 200000;
  bool debias = true;
};

/// Log-domain Sinkhorn on the atomic measures with cost |x−y|² and
/// regularization ε KL(π | ρ⊗g). The returned plan is rounded onto the
/// exact marginals; w2_squared is the Sinkhorn divergence when debiasing.
TransportResult sinkhorn_entropic(const DensityField& rho, const DensityField& g, double eps,
                                  const SinkhornOptions& opts = {});

/// Pushforward of `source` under x ↦ (1−s)x + sT(x), re-binned onto the
/// source grid with exact mass conservation. Throws ErrorKind::parameter
/// for s outside [0, 1].
DensityField displacement_interpolate(const TransportResult& res, const DensityField& source,
                                      double s);

}  // namespace ksjko
