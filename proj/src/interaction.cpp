// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/interaction.hpp"

#include "fluidrec/error.hpp"
#include "fluidrec/parallel.hpp"

#include <limits>
#include <numbers>

namespace fluidrec {

void WindSpec::validate() const
{
    if (std::abs(direction.norm() - 1.0) > 1e-9) {
        throw Error(ErrorCode::InvalidArgument, "wind direction must be unit length");
    }
    if (!(base_magnitude >= 0.0) || !std::isfinite(vertical_rate) || !std::isfinite(y_ref)) {
        throw Error(ErrorCode::InvalidArgument, "wind magnitude/rate invalid");
    }
}

Vec3 wind_force(const WindSpec& spec, const Vec3& p)
{
    return spec.direction * (spec.base_magnitude * std::exp(spec.vertical_rate * (p.y() - spec.y_ref)));
}

Mat3 wind_force_jacobian(const WindSpec& spec, const Vec3& p)
{
    Mat3 j = Mat3::Zero();
    j.col(1) = spec.vertical_rate * wind_force(spec, p);
    return j;
}

RigidBody RigidBody::sphere(const Vec3& center, Real radius, std::size_t surface_count)
{
    if (!(radius > 0.0) || surface_count == 0) {
        throw Error(ErrorCode::InvalidArgument, "sphere needs positive radius and surface points");
    }
    RigidBody body;
    const Real golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t k = 0; k < surface_count; ++k) {
        const Real y = surface_count == 1
                           ? 1.0
                           : 1.0 - 2.0 * (static_cast<Real>(k) + 0.5) / static_cast<Real>(surface_count);
        const Real rr = std::sqrt(std::max(0.0, 1.0 - y * y));
        const Real phi = golden * static_cast<Real>(k);
        const Vec3 n(rr * std::cos(phi), y, rr * std::sin(phi));
        body.normals_.push_back(n);
        body.surface_.push_back(center + radius * n);
    }
    // Relative slack keeps the rounded surface samples on the boundary.
    const Real inner = radius * (1.0 - 1e-12);
    body.inside_ = [center, inner](const Vec3& p) { return (p - center).norm() < inner; };
    return body;
}

RigidBody RigidBody::box(const Aabb& b, Real spacing)
{
    if (!b.valid() || !(spacing > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "box body needs a valid box and spacing");
    }
    RigidBody body;
    const Vec3 ext = b.extent();
    int n[3];
    for (int a = 0; a < 3; ++a) {
        n[a] = std::max(1, static_cast<int>(std::ceil(ext[a] / spacing)));
    }
    for (int i = 0; i <= n[0]; ++i) {
        for (int j = 0; j <= n[1]; ++j) {
            for (int k = 0; k <= n[2]; ++k) {
                const int idx[3] = {i, j, k};
                Vec3 normal = Vec3::Zero();
                int faces = 0;
                for (int a = 0; a < 3; ++a) {
                    if (idx[a] == 0) {
                        normal[a] -= 1.0;
                        ++faces;
                    } else if (idx[a] == n[a]) {
                        normal[a] += 1.0;
                        ++faces;
                    }
                }
                if (faces == 0) {
                    continue;
                }
                body.surface_.push_back(b.lo + Vec3(ext.x() * i / n[0], ext.y() * j / n[1], ext.z() * k / n[2]));
                body.normals_.push_back(normal.normalized());
            }
        }
    }
    body.inside_ = [b](const Vec3& p) {
        return (p.array() > b.lo.array()).all() && (p.array() < b.hi.array()).all();
    };
    return body;
}

RigidBody RigidBody::from_surface_points(std::vector<Vec3> points)
{
    if (points.empty()) {
        throw Error(ErrorCode::InvalidArgument, "rigid body needs surface points");
    }
    RigidBody body;
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : points) {
        centroid += p;
    }
    centroid /= static_cast<Real>(points.size());
    for (const Vec3& p : points) {
        const Vec3 d = p - centroid;
        body.normals_.push_back(d.norm() > 0.0 ? Vec3(d.normalized()) : Vec3::UnitY());
    }
    body.surface_ = std::move(points);
    // The predicate shares the surface arrays by value so the body stays copyable.
    const std::vector<Vec3> surface = body.surface_;
    const std::vector<Vec3> normals = body.normals_;
    body.inside_ = [surface, normals](const Vec3& p) {
        std::size_t best = 0;
        Real best_d = std::numeric_limits<Real>::infinity();
        for (std::size_t k = 0; k < surface.size(); ++k) {
            const Real d = (p - surface[k]).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        return (p - surface[best]).dot(normals[best]) < 0.0;
    };
    return body;
}

RigidBody RigidBody::custom(std::vector<Vec3> points, std::vector<Vec3> normals, InsideTest inside)
{
    if (points.empty() || points.size() != normals.size() || !inside) {
        throw Error(ErrorCode::InvalidArgument, "rigid body needs matching surface points and normals");
    }
    RigidBody body;
    body.surface_ = std::move(points);
    body.normals_ = std::move(normals);
    body.inside_ = std::move(inside);
    return body;
}

std::size_t RigidBody::nearest_surface(const Vec3& p) const
{
    std::size_t best = 0;
    Real best_d = std::numeric_limits<Real>::infinity();
    for (std::size_t k = 0; k < surface_.size(); ++k) {
        const Real d = (p - surface_[k]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

RigidBody RigidBody::translated(const Vec3& d) const
{
    RigidBody out = *this;
    for (Vec3& s : out.surface_) {
        s += d;
    }
    InsideTest base = inside_;
    out.inside_ = [base, d](const Vec3& p) { return base(p - d); };
    out.pose_ = Eigen::Translation3d(d) * pose_;
    return out;
}

std::vector<Vec3> rigid_project(std::span<const Vec3> positions, const RigidBody& body, Real margin)
{
    std::vector<Vec3> out(positions.begin(), positions.end());
    parallel_for(out.size(), [&](std::size_t i) {
        if (!body.inside(out[i])) {
            return;
        }
        const std::size_t k = body.nearest_surface(out[i]);
        out[i] = body.surface_points()[k] + margin * body.surface_normals()[k];
    });
    return out;
}

}  // namespace fluidrec
