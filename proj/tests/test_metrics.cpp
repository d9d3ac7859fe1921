// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support.hpp"

#include "fluidrec/error.hpp"
#include "fluidrec/metrics.hpp"
#include "fluidrec/ssim.hpp"

using namespace fluidrec;
using namespace fluidrec::test;

namespace {

FluidTrajectory single_frame(const PhysicalParticleSet& p)
{
    FluidTrajectory t;
    t.physical.push_back(p);
    t.visual.emplace_back();
    return t;
}

FluidParams unit_params(Real h)
{
    FluidParams p;
    p.kernel.radius = h;
    return p;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr unit values")
{
    const Image zero(8, 8, 3, 0.0);
    CHECK(psnr(zero, zero) == kPsnrCap);
    CHECK(psnr(zero, Image(8, 8, 3, 1.0)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(psnr(zero, Image(8, 8, 3, 0.1)) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK_THROWS_AS(psnr(zero, Image(8, 9, 3)), Error);
}

TEST_CASE("ssim unit values and symmetry")
{
    Rng rng(81);
    Image a(24, 20, 3), b(24, 20, 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a.data[i] = uniform(rng, 0.0, 1.0);
        b.data[i] = uniform(rng, 0.0, 1.0);
    }
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(ssim(a, b) < 0.5);
    CHECK(psnr(a, b) == doctest::Approx(psnr(b, a)).epsilon(1e-15));
    CHECK_THROWS_AS(ssim(Image(8, 8, 3), Image(8, 8, 3)), Error);

    Image bin(16, 16, 1), neg(16, 16, 1);
    for (std::size_t i = 0; i < bin.size(); ++i) {
        bin.data[i] = static_cast<Real>((i * 7 + i / 16) % 2);
        neg.data[i] = 1.0 - bin.data[i];
    }
    CHECK(ssim(bin, neg) < 0.0);

    const Real m1 = 0.2, m2 = 0.7, c1 = 0.01 * 0.01;
    CHECK(ssim(Image(16, 16, 1, m1), Image(16, 16, 1, m2)) ==
          doctest::Approx((2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1)).epsilon(1e-12));
}

TEST_CASE("ssim gradient matches central differences")
{
    Rng rng(82);
    Image a(14, 13, 1), b(14, 13, 1);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a.data[i] = uniform(rng, 0.0, 1.0);
        b.data[i] = uniform(rng, 0.0, 1.0);
    }
    Image g;
    ssim_with_grad(a, b, &g);
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(a.data.data(), static_cast<Eigen::Index>(a.size()));
    const auto fd = central_gradient(
        [&](const Eigen::VectorXd& v) {
            Image t = a;
            t.data.assign(v.data(), v.data() + v.size());
            return ssim(t, b);
        },
        x, 1e-6);
    CHECK(gradient_error(Eigen::Map<const Eigen::VectorXd>(g.data.data(), static_cast<Eigen::Index>(g.size())), fd) <=
          1e-5);
}

TEST_CASE("uniform translation has zero divergence")
{
    Rng rng(83);
    PhysicalParticleSet p = random_physical(rng, 400, Aabb{Vec3(-3.0, 1.0, -3.0), Vec3(3.0, 7.0, 3.0)}, 0.0);
    p.velocities.assign(p.size(), Vec3(0.7, 2.0, -1.3));
    GridSpec grid;
    grid.resolution = 16;
    grid.bounds = Aabb{Vec3(-4.0, 0.0, -4.0), Vec3(4.0, 8.0, 4.0)};
    std::vector<Real> per;
    CHECK(evaluate_divergence(single_frame(p), grid, unit_params(1.2), &per) <= 1e-10);
    CHECK(per.size() == 1);
}

TEST_CASE("divergence of trivial and expanding fields")
{
    const GridSpec grid{16, Aabb{Vec3::Constant(-2.0), Vec3::Constant(2.0)}};
    PhysicalParticleSet one;
    one.positions = {Vec3(0.25, 0.5, -0.125)};
    one.velocities = {Vec3(1.0, -2.0, 0.5)};
    const VelocityFieldView single(one, KernelSpec{1.0, KernelKind::Poly6});
    CHECK(std::abs(divergence_at(single, one.positions[0], Vec3::Constant(0.1))) <= 1e-12);

    PhysicalParticleSet pair;
    pair.positions = {Vec3(-0.3, 0.0, 0.0), Vec3(0.3, 0.0, 0.0)};
    pair.velocities = {Vec3(-1.0, 0.0, 0.0), Vec3(1.0, 0.0, 0.0)};
    const VelocityFieldView f(pair, KernelSpec{1.0, KernelKind::Poly6});
    CHECK(divergence_at(f, Vec3::Zero(), Vec3::Constant(1e-3)) > 0.0);
    CHECK(evaluate_divergence(single_frame(pair), grid, unit_params(1.0)) > 0.0);

    FluidTrajectory empty;
    CHECK(evaluate_divergence(empty, grid, unit_params(1.0)) == 0.0);
}

TEST_CASE("divergence is invariant under a rigid translation")
{
    Rng rng(84);
    const PhysicalParticleSet p = random_physical(rng, 300, Aabb{Vec3::Zero(), Vec3::Constant(4.0)}, 2.0);
    const Vec3 d(5.0, 3.0, -7.0);
    PhysicalParticleSet q = p;
    for (Vec3& x : q.positions) {
        x += d;
    }
    const GridSpec grid{20, Aabb{Vec3::Constant(-0.5), Vec3::Constant(4.5)}};
    const GridSpec moved{20, grid.bounds.translated(d)};
    const Real a = evaluate_divergence(single_frame(p), grid, unit_params(1.0));
    const Real b = evaluate_divergence(single_frame(q), moved, unit_params(1.0));
    CHECK(a > 0.0);
    CHECK(rel_diff(a, b) <= 1e-9);
}

TEST_CASE("divergence agrees with the analytic field divergence")
{
    // A linear field u = A x sampled densely: kernel interpolation reproduces
    // it well inside the cloud, so the grid estimate approaches trace(A).
    Mat3 a;
    a << 0.3, 0.1, 0.0, -0.2, 0.5, 0.1, 0.0, 0.2, -0.1;
    PhysicalParticleSet p;
    for (const Vec3& x : lattice(21, 0.25, Vec3::Constant(-2.5))) {
        p.positions.push_back(x);
        p.velocities.push_back(a * x);
    }
    const VelocityFieldView f(p, KernelSpec{1.0, KernelKind::Poly6});
    const Real want = a.trace();
    for (const Vec3& x : {Vec3(0.0, 0.0, 0.0), Vec3(0.3, -0.4, 0.2)}) {
        const Real coarse = divergence_at(f, x, Vec3::Constant(0.1));
        const Real fine = divergence_at(f, x, Vec3::Constant(0.05));
        CHECK(coarse == doctest::Approx(want).epsilon(0.02));
        CHECK(std::abs(fine - coarse) <= 0.05 * std::abs(coarse));
    }
}

TEST_CASE("grid spec validation and nodes")
{
    GridSpec g{32, Aabb{Vec3::Zero(), Vec3(31.0, 62.0, 93.0)}};
    CHECK(g.spacing() == Vec3(1.0, 2.0, 3.0));
    CHECK(g.node(0, 0, 0) == Vec3::Zero());
    CHECK(g.node(31, 31, 31) == g.bounds.hi);
    GridSpec bad = g;
    bad.resolution = 1;
    CHECK_THROWS(bad.validate());
}

}  // TEST_SUITE
