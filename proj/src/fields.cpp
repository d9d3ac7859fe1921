// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/fields.hpp"

#include "fluidrec/parallel.hpp"

namespace fluidrec {

VelocityFieldView::VelocityFieldView(const PhysicalParticleSet& particles, KernelSpec kernel)
    : particles_(&particles), kernel_(kernel), poly6_(kernel.radius), spiky_(kernel.radius),
      grid_(HashGrid::build(particles.positions, kernel.radius))
{
}

Real VelocityFieldView::weight(const Vec3& r) const
{
    if (kernel_.kind == KernelKind::Poly6) {
        return poly6_.value_r2(r.squaredNorm());
    }
    return spiky_.value(r.norm());
}

Vec3 VelocityFieldView::weight_gradient(const Vec3& r) const
{
    if (kernel_.kind == KernelKind::Poly6) {
        return poly6_.gradient(r, r.squaredNorm());
    }
    return spiky_.gradient(r, r.norm());
}

Real VelocityFieldView::density_at(const Vec3& x) const
{
    const auto& pos = particles_->positions;
    Real sum = 0.0;
    grid_.for_each_candidate(x, [&](std::uint32_t j) { sum += weight(x - pos[j]); });
    return sum;
}

Vec3 VelocityFieldView::velocity_and_weight(const Vec3& x, Real& w) const
{
    const auto& pos = particles_->positions;
    const auto& vel = particles_->velocities;
    Real den = 0.0;
    Vec3 num = Vec3::Zero();
    grid_.for_each_candidate(x, [&](std::uint32_t j) {
        const Real k = weight(x - pos[j]);
        if (k > 0.0) {
            den += k;
            num += k * vel[j];
        }
    });
    w = den;
    if (den < kVelocityWeightFloor) {
        return Vec3::Zero();
    }
    return num / den;
}

Vec3 VelocityFieldView::velocity_at(const Vec3& x) const
{
    Real w = 0.0;
    return velocity_and_weight(x, w);
}

Vec3 VelocityFieldView::advect(const Vec3& x, Real dt) const
{
    return x + dt * velocity_at(x);
}

void VelocityFieldView::advect_adjoint(const Vec3& x, Real dt, const Vec3& x_bar,
                                       std::span<Vec3> p_bar, std::span<Vec3> u_bar) const
{
    Real den = 0.0;
    const Vec3 v = velocity_and_weight(x, den);
    if (den < kVelocityWeightFloor) {
        return;
    }
    const auto& pos = particles_->positions;
    const auto& vel = particles_->velocities;
    const Vec3 g = dt * x_bar / den;  // adjoint of V scaled by 1/den
    grid_.for_each_candidate(x, [&](std::uint32_t j) {
        const Vec3 r = x - pos[j];
        const Real k = weight(r);
        if (k <= 0.0) {
            return;
        }
        u_bar[j] += k * g;
        // dK(x - p_j)/dp_j = -grad K(r)
        p_bar[j] -= g.dot(vel[j] - v) * weight_gradient(r);
    });
}

std::vector<Vec3> advect_all(const VelocityFieldView& field, std::span<const Vec3> xs, Real dt)
{
    std::vector<Vec3> out(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = field.advect(xs[i], dt); });
    return out;
}

}  // namespace fluidrec
