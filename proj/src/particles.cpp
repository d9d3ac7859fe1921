// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/particles.hpp"

#include "fluidrec/error.hpp"

namespace fluidrec {

void PhysicalParticleSet::validate() const
{
    if (positions.size() != velocities.size()) {
        throw Error(ErrorCode::LengthMismatch, "physical positions/velocities length differ");
    }
    if (!all_finite(positions) || !all_finite(velocities)) {
        throw Error(ErrorCode::NonFinitePosition, "non-finite physical particle state");
    }
}

void PhysicalParticleSet::append(const PhysicalParticleSet& other)
{
    positions.insert(positions.end(), other.positions.begin(), other.positions.end());
    velocities.insert(velocities.end(), other.velocities.begin(), other.velocities.end());
}

void VisualParticleSet::validate() const
{
    const std::size_t n = positions.size();
    if (colors.size() != n || scales.size() != n || opacities.size() != n || rotations.size() != n) {
        throw Error(ErrorCode::LengthMismatch, "visual attribute arrays differ in length");
    }
    if (!all_finite(positions)) {
        throw Error(ErrorCode::NonFinitePosition, "non-finite visual particle position");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(opacities[i] >= 0.0 && opacities[i] <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "opacity outside [0, 1]");
        }
        if (!(scales[i].minCoeff() > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "non-positive visual scale");
        }
        if (std::abs(rotations[i].norm() - 1.0) > 1e-9) {
            throw Error(ErrorCode::InvalidArgument, "rotation quaternion not unit-norm");
        }
    }
}

void VisualParticleSet::append(const VisualParticleSet& other)
{
    positions.insert(positions.end(), other.positions.begin(), other.positions.end());
    colors.insert(colors.end(), other.colors.begin(), other.colors.end());
    scales.insert(scales.end(), other.scales.begin(), other.scales.end());
    opacities.insert(opacities.end(), other.opacities.begin(), other.opacities.end());
    rotations.insert(rotations.end(), other.rotations.begin(), other.rotations.end());
}

void VisualParticleSet::resize(std::size_t n)
{
    positions.resize(n, Vec3::Zero());
    colors.resize(n, Vec3::Zero());
    scales.resize(n, Vec3::Ones());
    opacities.resize(n, 0.0);
    rotations.resize(n, Quat(1.0, 0.0, 0.0, 0.0));
}

}  // namespace fluidrec
