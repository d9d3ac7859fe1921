// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/engine.hpp"
#include "fluidrec/fields.hpp"
#include "fluidrec/image.hpp"

#include <string>
#include <vector>

namespace fluidrec {

/// Regular lattice of resolution^3 nodes spanning `bounds` (corners
/// included). The finite-difference step along each axis is the node
/// spacing on that axis.
struct GridSpec {
    int resolution = 64;
    Aabb bounds{Vec3(-16.0, 0.0, -16.0), Vec3(16.0, 48.0, 16.0)};

    Vec3 spacing() const { return bounds.extent() / static_cast<Real>(resolution - 1); }
    Vec3 node(int i, int j, int k) const;
    void validate() const;
};

/// Points with total kernel weight at or below this are excluded.
inline constexpr Real kDivergenceMask = 1e-6;

/// Central-difference divergence of the interpolated velocity at x. Along an
/// axis whose stencil point lacks support, the difference is one-sided
/// against x; with neither neighbour supported the axis contributes zero.
Real divergence_at(const VelocityFieldView& field, const Vec3& x, const Vec3& step);

/// Mean |div V| over masked nodes, per timestep; timesteps without a masked
/// node are skipped. Returns the mean of the per-timestep values (0 when no
/// timestep qualifies).
Real evaluate_divergence(const FluidTrajectory& traj, const GridSpec& grid, const FluidParams& params,
                         std::vector<Real>* per_timestep = nullptr);

/// Value reported for identical images.
inline constexpr Real kPsnrCap = 99.0;

/// 10 log10(1 / MSE) with peak 1, capped at kPsnrCap. Throws
/// Error(DimensionMismatch).
Real psnr(const Image& a, const Image& b);

struct MetricRecord {
    std::string name;
    Real value = 0.0;
};

}  // namespace fluidrec
