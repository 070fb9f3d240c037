#pragma once

#include <string>

#include "ksjko/grid.hpp"

namespace ksjko {

/// Builds a unit-mass initial density from a profile spec. Profiles:
///   uniform
///   bump:center=<c>,width=<w>,height=<h>[,floor=<f>]   (cos² bump, then normalized)
///   two_bumps:c1=<a>,c2=<b>,width=<w>,height=<h>[,floor=<f>]
///   plateau:center=<c>,height=<h>,ramp=<r>[,floor=<f>] (1D; exact peak h, unit mass)
///   cosine:amp=<a>[,k=<k>]                          (1 + a cos(kπ(x−lo)/L))
///   smooth_step:center=<c>,width=<w>,contrast=<s>    (1 + s tanh((x−c)/w))
///   from_file:path=<p>                               (one value per line, or a snapshot CSV)
/// In 2D the radial profiles use the distance to (center, center) and
/// cosine/smooth_step act along x. Throws ErrorKind::configuration on a bad spec.
DensityField make_profile(const std::string& spec, const Grid& grid);

/// Validates a profile spec without building it (no file access).
void check_profile_spec(const std::string& spec);

}  // namespace ksjko
