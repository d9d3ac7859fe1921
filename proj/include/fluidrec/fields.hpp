// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/kernel.hpp"
#include "fluidrec/neighbor_grid.hpp"
#include "fluidrec/particles.hpp"

#include <span>

namespace fluidrec {

/// Below this total kernel weight the interpolated velocity is the still-air
/// value (zero).
inline constexpr Real kVelocityWeightFloor = 1e-12;

/// Kernel-weighted velocity and density fields of a frozen particle set.
/// Keeps a reference to `particles`; the set must outlive the view and must
/// not be mutated while the view is in use. All queries are re-entrant.
class VelocityFieldView {
public:
    VelocityFieldView(const PhysicalParticleSet& particles, KernelSpec kernel);

    const PhysicalParticleSet& particles() const { return *particles_; }
    const KernelSpec& kernel() const { return kernel_; }
    const HashGrid& grid() const { return grid_; }

    /// sum_j u_j K(x - p_j) / sum_j K(x - p_j)
    Vec3 velocity_at(const Vec3& x) const;
    /// sum_j K(x - p_j)
    Real density_at(const Vec3& x) const;
    /// Both at once; `weight` receives the density.
    Vec3 velocity_and_weight(const Vec3& x, Real& weight) const;

    /// Forward Euler: x + dt V(x).
    Vec3 advect(const Vec3& x, Real dt) const;

    /// Accumulates d(advect(x, dt))^T x_bar into per-particle position and
    /// velocity adjoints (both sized like the particle set).
    void advect_adjoint(const Vec3& x, Real dt, const Vec3& x_bar, std::span<Vec3> p_bar,
                        std::span<Vec3> u_bar) const;

private:
    Real weight(const Vec3& r) const;
    Vec3 weight_gradient(const Vec3& r) const;

    const PhysicalParticleSet* particles_;
    KernelSpec kernel_;
    Poly6 poly6_;
    Spiky spiky_;
    HashGrid grid_;
};

/// Advects every point; parallel, deterministic.
std::vector<Vec3> advect_all(const VelocityFieldView& field, std::span<const Vec3> xs, Real dt);

}  // namespace fluidrec
