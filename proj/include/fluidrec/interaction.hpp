// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/vec.hpp"

#include <functional>
#include <span>
#include <vector>

namespace fluidrec {

/// Body force growing exponentially with height:
/// f(p) = direction * base_magnitude * exp(vertical_rate * (p.y - y_ref)).
struct WindSpec {
    Vec3 direction = Vec3::UnitX();
    Real base_magnitude = 0.0;
    Real vertical_rate = 0.0;
    Real y_ref = 0.0;

    void validate() const;
};

Vec3 wind_force(const WindSpec& spec, const Vec3& p);

/// Gradient of wind_force with respect to p (only the y column is nonzero).
Mat3 wind_force_jacobian(const WindSpec& spec, const Vec3& p);

/// A fixed obstacle for one-way coupling, represented by surface particles.
class RigidBody {
public:
    using InsideTest = std::function<bool(const Vec3&)>;

    /// Surface points sampled on a sphere (Fibonacci lattice).
    static RigidBody sphere(const Vec3& center, Real radius, std::size_t surface_count);

    /// Axis-aligned box with surface points on a regular lattice of spacing
    /// at most `spacing`.
    static RigidBody box(const Aabb& box, Real spacing);

    /// Arbitrary closed surface from points. Membership: a point is inside
    /// when it lies behind the outward normal of its nearest surface point
    /// (outward = away from the point-cloud centroid). Valid for star-shaped
    /// bodies around the centroid.
    static RigidBody from_surface_points(std::vector<Vec3> points);

    /// Explicit surface samples, outward normals, and membership predicate.
    static RigidBody custom(std::vector<Vec3> points, std::vector<Vec3> normals, InsideTest inside);

    const std::vector<Vec3>& surface_points() const { return surface_; }
    const std::vector<Vec3>& surface_normals() const { return normals_; }
    bool inside(const Vec3& p) const { return inside_(p); }

    /// Index of the nearest surface point; ties go to the lowest index.
    std::size_t nearest_surface(const Vec3& p) const;

    /// Fixed rigid transform applied when the body was built (identity unless
    /// constructed with an offset). Never modified by fluid operations.
    const Eigen::Isometry3d& pose() const { return pose_; }

    /// Returns a copy translated by d (surface, normals, predicate, pose).
    RigidBody translated(const Vec3& d) const;

private:
    std::vector<Vec3> surface_;
    std::vector<Vec3> normals_;
    InsideTest inside_;
    Eigen::Isometry3d pose_ = Eigen::Isometry3d::Identity();
};

/// Moves every position inside the body to its nearest surface point plus
/// `margin` along that point's outward normal. Outside positions are
/// returned unchanged.
std::vector<Vec3> rigid_project(std::span<const Vec3> positions, const RigidBody& body, Real margin);

}  // namespace fluidrec
