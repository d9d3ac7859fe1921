// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace fluidrec {

using Real = double;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline bool is_finite(const Vec3& v)
{
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

inline bool all_finite(std::span<const Vec3> vs)
{
    return std::all_of(vs.begin(), vs.end(), [](const Vec3& v) { return is_finite(v); });
}

/// Axis-aligned box [lo, hi].
struct Aabb {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();

    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return 0.5 * (lo + hi); }
    bool valid() const { return (hi.array() > lo.array()).all(); }
    bool contains(const Vec3& p) const
    {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
    bool contains(const Aabb& b) const { return contains(b.lo) && contains(b.hi); }
    Aabb translated(const Vec3& d) const { return {lo + d, hi + d}; }
};

}  // namespace fluidrec
