// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/vec.hpp"

#include <cstddef>
#include <vector>

namespace fluidrec {

/// Carriers of the velocity and density fields. Unit mass each.
struct PhysicalParticleSet {
    std::vector<Vec3> positions;
    std::vector<Vec3> velocities;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }

    /// Throws Error(LengthMismatch) or Error(NonFinitePosition).
    void validate() const;

    void append(const PhysicalParticleSet& other);
};

using Quat = Eigen::Vector4d;  // (w, x, y, z)

/// Appearance splats advected by the velocity field.
struct VisualParticleSet {
    std::vector<Vec3> positions;
    std::vector<Vec3> colors;     // RGB in [0, 1]
    std::vector<Vec3> scales;     // per-axis standard deviations, > 0
    std::vector<Real> opacities;  // [0, 1]
    std::vector<Quat> rotations;  // unit quaternions

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }

    void validate() const;
    void append(const VisualParticleSet& other);
    void resize(std::size_t n);
};

/// Constant attributes assigned to every freshly seeded visual particle.
struct VisualDefaults {
    Vec3 color = Vec3::Constant(0.9);
    Vec3 scale = Vec3::Constant(0.45);
    Real opacity = 0.12;
    Quat rotation = Quat(1.0, 0.0, 0.0, 0.0);
};

}  // namespace fluidrec
