// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the unit and acceptance tests: seeded random scenes,
// brute-force oracles, and central-difference gradient checks.
#pragma once

#include "fluidrec/kernel.hpp"
#include "fluidrec/particles.hpp"
#include "fluidrec/vec.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace fluidrec::test {

using Rng = std::mt19937_64;

inline Real uniform(Rng& rng, Real lo, Real hi)
{
    return std::uniform_real_distribution<Real>(lo, hi)(rng);
}

inline Vec3 uniform_vec(Rng& rng, const Aabb& box)
{
    return Vec3(uniform(rng, box.lo.x(), box.hi.x()), uniform(rng, box.lo.y(), box.hi.y()),
                uniform(rng, box.lo.z(), box.hi.z()));
}

inline Vec3 uniform_vec(Rng& rng, Real lo, Real hi)
{
    return uniform_vec(rng, Aabb{Vec3::Constant(lo), Vec3::Constant(hi)});
}

inline PhysicalParticleSet random_physical(Rng& rng, std::size_t n, const Aabb& box, Real speed)
{
    PhysicalParticleSet p;
    for (std::size_t i = 0; i < n; ++i) {
        p.positions.push_back(uniform_vec(rng, box));
        p.velocities.push_back(uniform_vec(rng, -speed, speed));
    }
    return p;
}

inline Quat random_unit_quat(Rng& rng)
{
    std::normal_distribution<Real> g(0.0, 1.0);
    Quat q(g(rng), g(rng), g(rng), g(rng));
    return q / q.norm();
}

inline VisualParticleSet random_visual(Rng& rng, std::size_t n, const Aabb& box, Real scale_lo, Real scale_hi)
{
    VisualParticleSet v;
    for (std::size_t i = 0; i < n; ++i) {
        v.positions.push_back(uniform_vec(rng, box));
        v.colors.push_back(uniform_vec(rng, 0.1, 0.9));
        v.scales.push_back(uniform_vec(rng, scale_lo, scale_hi));
        v.opacities.push_back(uniform(rng, 0.2, 0.8));
        v.rotations.push_back(random_unit_quat(rng));
    }
    return v;
}

/// Regular lattice of n^3 points with spacing s starting at origin.
inline std::vector<Vec3> lattice(int n, Real s, const Vec3& origin = Vec3::Zero())
{
    std::vector<Vec3> out;
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                out.push_back(origin + s * Vec3(i, j, k));
            }
        }
    }
    return out;
}

inline Real rel_diff(Real a, Real b)
{
    const Real scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// ---------------------------------------------------------------------------
// Brute-force field oracles: independent loops over every particle.

inline Real brute_poly6(Real h, const Vec3& r)
{
    const Real r2 = r.dot(r);
    if (r2 >= h * h) {
        return 0.0;
    }
    const Real d = h * h - r2;
    return 315.0 / (64.0 * 3.14159265358979323846 * std::pow(h, 9)) * d * d * d;
}

inline Real brute_density(const PhysicalParticleSet& p, Real h, const Vec3& x)
{
    Real sum = 0.0;
    for (const Vec3& q : p.positions) {
        sum += brute_poly6(h, x - q);
    }
    return sum;
}

inline Vec3 brute_velocity(const PhysicalParticleSet& p, Real h, const Vec3& x)
{
    Real den = 0.0;
    Vec3 num = Vec3::Zero();
    for (std::size_t j = 0; j < p.size(); ++j) {
        const Real w = brute_poly6(h, x - p.positions[j]);
        den += w;
        num += w * p.velocities[j];
    }
    return den < 1e-12 ? Vec3::Zero() : Vec3(num / den);
}

// ---------------------------------------------------------------------------
// Gradient checks.

using ScalarFn = std::function<Real(const Eigen::VectorXd&)>;

/// Central-difference gradient of f at x with per-coordinate step h.
inline Eigen::VectorXd central_gradient(const ScalarFn& f, const Eigen::VectorXd& x, Real h)
{
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd y = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        y[i] = x[i] + h;
        const Real fp = f(y);
        y[i] = x[i] - h;
        const Real fm = f(y);
        y[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// ||analytic - fd|| / ||fd|| (0 when both vanish).
inline Real gradient_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& fd)
{
    const Real scale = std::max(analytic.norm(), fd.norm());
    return scale == 0.0 ? 0.0 : (analytic - fd).norm() / scale;
}

inline Eigen::VectorXd flatten(const std::vector<Vec3>& v)
{
    Eigen::VectorXd out(3 * static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.segment<3>(3 * static_cast<Eigen::Index>(i)) = v[i];
    }
    return out;
}

inline std::vector<Vec3> unflatten(const Eigen::VectorXd& x)
{
    std::vector<Vec3> out(static_cast<std::size_t>(x.size() / 3));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x.segment<3>(3 * static_cast<Eigen::Index>(i));
    }
    return out;
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("fluidrec_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fluidrec::test
