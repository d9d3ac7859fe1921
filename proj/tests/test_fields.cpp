// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support.hpp"

#include "fluidrec/fields.hpp"
#include "fluidrec/kernel.hpp"

#include <numbers>

using namespace fluidrec;
using namespace fluidrec::test;

TEST_SUITE("fields") {

TEST_CASE("poly6 closed-form values")
{
    const KernelSpec h1{1.0, KernelKind::Poly6};
    CHECK(kernel_eval(h1, Vec3(1.0, 0.0, 0.0)) == 0.0);
    CHECK(kernel_eval(h1, Vec3::Zero()) == doctest::Approx(315.0 / (64.0 * std::numbers::pi)).epsilon(1e-15));
    CHECK(kernel_eval(h1, Vec3::Zero()) == doctest::Approx(1.5666814).epsilon(1e-7));
    CHECK(kernel_eval(KernelSpec{2.0, KernelKind::Poly6}, Vec3(0.0, 3.0, 0.0)) == 0.0);
}

TEST_CASE("kernels vanish outside the support, are symmetric, and peak at zero")
{
    Rng rng(11);
    for (KernelKind kind : {KernelKind::Poly6, KernelKind::Spiky}) {
        const KernelSpec k{1.7, kind};
        const Real peak = kernel_eval(k, Vec3::Zero());
        for (int t = 0; t < 200; ++t) {
            const Vec3 r = uniform_vec(rng, -2.5, 2.5);
            const Real w = kernel_eval(k, r);
            CHECK(w == kernel_eval(k, -r));
            CHECK(w <= peak);
            if (r.norm() >= k.radius) {
                CHECK(w == 0.0);
            }
        }
    }
}

TEST_CASE("poly6 integrates to one over its support")
{
    // Radial Simpson rule of 4 pi r^2 W(r).
    for (Real h : {0.5, 1.0, 3.0}) {
        const KernelSpec k{h, KernelKind::Poly6};
        const int n = 2000;
        const Real dr = h / n;
        Real sum = 0.0;
        for (int i = 0; i <= n; ++i) {
            const Real r = i * dr;
            const Real f = 4.0 * std::numbers::pi * r * r * kernel_eval(k, Vec3(r, 0.0, 0.0));
            sum += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
        }
        CHECK(sum * dr / 3.0 == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("poly6 gradient matches central differences")
{
    Rng rng(12);
    const Real h = 1.3;
    const KernelSpec k{h, KernelKind::Poly6};
    for (int t = 0; t < 100; ++t) {
        Vec3 r = uniform_vec(rng, -h, h);
        if (r.norm() > 0.9 * h || r.norm() < 0.05 * h) {
            continue;
        }
        const Vec3 g = kernel_gradient(k, r);
        const Real step = 1e-5 * h;
        for (int a = 0; a < 3; ++a) {
            Vec3 d = Vec3::Zero();
            d[a] = step;
            const Real fd = (kernel_eval(k, r + d) - kernel_eval(k, r - d)) / (2.0 * step);
            CHECK(std::abs(g[a] - fd) <= 1e-5 * g.norm());
        }
    }
}

TEST_CASE("velocity of a single particle and of a symmetric pair")
{
    PhysicalParticleSet one;
    one.positions = {Vec3::Zero()};
    one.velocities = {Vec3(0.0, 2.0, 0.0)};
    const VelocityFieldView f1(one, KernelSpec{1.0, KernelKind::Poly6});
    CHECK((f1.velocity_at(Vec3(0.3, -0.2, 0.1)) - Vec3(0.0, 2.0, 0.0)).norm() < 1e-15);

    PhysicalParticleSet two;
    two.positions = {Vec3(-0.4, 0.0, 0.0), Vec3(0.4, 0.0, 0.0)};
    two.velocities = {Vec3(1.0, 0.0, 0.0), Vec3(-1.0, 0.0, 0.0)};
    const VelocityFieldView f2(two, KernelSpec{1.0, KernelKind::Poly6});
    CHECK(f2.velocity_at(Vec3::Zero()).norm() == 0.0);
}

TEST_CASE("zero-weight queries fall back to still air")
{
    PhysicalParticleSet one;
    one.positions = {Vec3::Zero()};
    one.velocities = {Vec3(5.0, 0.0, 0.0)};
    const VelocityFieldView f(one, KernelSpec{1.0, KernelKind::Poly6});
    CHECK(f.velocity_at(Vec3(3.0, 0.0, 0.0)) == Vec3::Zero());
    CHECK(f.density_at(Vec3(3.0, 0.0, 0.0)) == 0.0);

    const PhysicalParticleSet empty;
    const VelocityFieldView fe(empty, KernelSpec{1.0, KernelKind::Poly6});
    CHECK(fe.density_at(Vec3::Zero()) == 0.0);
    CHECK(fe.velocity_at(Vec3::Zero()) == Vec3::Zero());
    CHECK(f.density_at(Vec3::Zero()) == kernel_eval(KernelSpec{1.0, KernelKind::Poly6}, Vec3::Zero()));
}

TEST_CASE("grid-accelerated fields equal brute force on random sets")
{
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng() % 64;
        const Real h = uniform(rng, 0.3, 1.5);
        const PhysicalParticleSet p = random_physical(rng, n, Aabb{Vec3::Constant(-2.0), Vec3::Constant(2.0)}, 3.0);
        const VelocityFieldView f(p, KernelSpec{h, KernelKind::Poly6});
        for (int q = 0; q < 20; ++q) {
            const Vec3 x = uniform_vec(rng, -2.5, 2.5);
            const Real rho = brute_density(p, h, x);
            CHECK(rel_diff(f.density_at(x), rho) <= 1e-12);
            const Vec3 v = brute_velocity(p, h, x);
            const Vec3 got = f.velocity_at(x);
            CHECK((got - v).norm() <= 1e-12 * std::max(1.0, v.norm()));
        }
    }
}

TEST_CASE("advection")
{
    const PhysicalParticleSet empty;
    const VelocityFieldView still(empty, KernelSpec{1.0, KernelKind::Poly6});
    const Vec3 x(0.25, 1.5, -3.0);
    CHECK(still.advect(x, 1.0 / 30.0) == x);

    PhysicalParticleSet one;
    one.positions = {Vec3::Zero()};
    one.velocities = {Vec3(0.0, 1.0, 0.0)};
    const VelocityFieldView f(one, KernelSpec{1.0, KernelKind::Poly6});
    const Vec3 y = f.advect(Vec3(0.1, 0.2, 0.0), 1.0 / 30.0);
    CHECK((y - Vec3(0.1, 0.2 + 1.0 / 30.0, 0.0)).norm() < 1e-15);

    // Constant field: every particle shares one velocity, so V = u wherever
    // there is support. Dyadic values keep the round trip exact.
    PhysicalParticleSet block;
    for (const Vec3& q : lattice(4, 0.5)) {
        block.positions.push_back(q);
        block.velocities.push_back(Vec3(0.5, -0.25, 1.0));
    }
    const VelocityFieldView fc(block, KernelSpec{1.0, KernelKind::Poly6});
    const Vec3 start(0.75, 0.75, 0.75);
    const Vec3 fwd = fc.advect(start, 0.125);
    const Vec3 back = fc.advect(fwd, -0.125);
    CHECK(back == start);
}

TEST_CASE("fields are translation equivariant")
{
    Rng rng(14);
    const PhysicalParticleSet p = random_physical(rng, 50, Aabb{Vec3::Zero(), Vec3::Constant(2.0)}, 1.0);
    PhysicalParticleSet shifted = p;
    const Vec3 d(10.25, -3.5, 7.0);
    for (Vec3& q : shifted.positions) {
        q += d;
    }
    const VelocityFieldView a(p, KernelSpec{0.8, KernelKind::Poly6});
    const VelocityFieldView b(shifted, KernelSpec{0.8, KernelKind::Poly6});
    for (int t = 0; t < 50; ++t) {
        const Vec3 x = uniform_vec(rng, 0.0, 2.0);
        CHECK(rel_diff(a.density_at(x), b.density_at(x + d)) <= 1e-9);
        CHECK((a.velocity_at(x) - b.velocity_at(x + d)).norm() <= 1e-9);
    }
}

TEST_CASE("advect_adjoint matches central differences")
{
    Rng rng(15);
    const Real h = 1.0;
    const Real dt = 1.0 / 30.0;
    PhysicalParticleSet p = random_physical(rng, 12, Aabb{Vec3::Zero(), Vec3::Constant(1.5)}, 2.0);
    const Vec3 x(0.7, 0.8, 0.75);
    const Vec3 xbar(0.3, -1.1, 0.6);
    auto objective = [&](const PhysicalParticleSet& s) {
        const VelocityFieldView f(s, KernelSpec{h, KernelKind::Poly6});
        return xbar.dot(f.advect(x, dt));
    };
    const VelocityFieldView f(p, KernelSpec{h, KernelKind::Poly6});
    std::vector<Vec3> pbar(p.size(), Vec3::Zero()), ubar(p.size(), Vec3::Zero());
    f.advect_adjoint(x, dt, xbar, pbar, ubar);

    const Eigen::VectorXd gp = central_gradient(
        [&](const Eigen::VectorXd& v) {
            PhysicalParticleSet s = p;
            s.positions = unflatten(v);
            return objective(s);
        },
        flatten(p.positions), 1e-6);
    const Eigen::VectorXd gu = central_gradient(
        [&](const Eigen::VectorXd& v) {
            PhysicalParticleSet s = p;
            s.velocities = unflatten(v);
            return objective(s);
        },
        flatten(p.velocities), 1e-6);
    CHECK(gradient_error(flatten(pbar), gp) < 1e-5);
    CHECK(gradient_error(flatten(ubar), gu) < 1e-6);
}

}  // TEST_SUITE
