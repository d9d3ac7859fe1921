// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support.hpp"

#include "fluidrec/parallel.hpp"
#include "fluidrec/pbf.hpp"

using namespace fluidrec;
using namespace fluidrec::test;

namespace {

FluidParams test_params(Real h = 1.0)
{
    FluidParams p;
    p.kernel.radius = h;
    p.domain = Aabb{Vec3::Constant(-100.0), Vec3::Constant(100.0)};
    return p;
}

/// Kernel radius consistent with the rest density, so a rest block is at rest.
FluidParams rest_params()
{
    FluidParams p = test_params();
    p.kernel.radius = default_kernel_radius(p.rest_density);
    return p;
}

/// A rest-spaced n^3 block for the given params.
std::vector<Vec3> rest_block(const FluidParams& p, int n)
{
    const Real s = p.kernel.radius / kDefaultSupportRatio;
    return lattice(n, s);
}

std::vector<Real> densities(const std::vector<Vec3>& pts, Real h)
{
    return particle_densities(pts, build_neighbor_lists(pts, h), h);
}

}  // namespace

TEST_SUITE("pbf") {

TEST_CASE("rest spacing reproduces the rest density inside a lattice")
{
    for (Real rho0 : {2.0, 1.5}) {
        FluidParams p = test_params();
        p.rest_density = rho0;
        p.kernel.radius = default_kernel_radius(rho0);
        const int n = 9;
        const auto pts = rest_block(p, n);
        const auto rho = densities(pts, p.kernel.radius);
        const std::size_t centre = static_cast<std::size_t>((4 * n + 4) * n + 4);
        CHECK(rho[centre] == doctest::Approx(rho0).epsilon(1e-12));
    }
}

TEST_CASE("velocity prediction applies buoyancy")
{
    FluidParams p = test_params();
    PhysicalParticleSet one;
    one.positions = {Vec3::Zero()};
    one.velocities = {Vec3::Zero()};
    const auto u = predict_velocities(one, p, ExternalForceField::none());
    CHECK(u[0].x() == 0.0);
    CHECK(u[0].y() == doctest::Approx(0.98).epsilon(1e-14));
    CHECK(u[0].z() == 0.0);
}

TEST_CASE("drag on an isolated particle")
{
    // A wide kernel makes the self contribution to the density negligible.
    FluidParams p = test_params(20.0);
    p.buoyancy_alpha = 0.0;
    PhysicalParticleSet one;
    one.positions = {Vec3::Zero()};
    one.velocities = {Vec3(1.0, 0.0, 0.0)};
    const auto u = predict_velocities(one, p, ExternalForceField::none());
    CHECK(u[0].x() == doctest::Approx(0.9).epsilon(1e-4));
    const Real self = Poly6(20.0).at_zero();
    CHECK(u[0].x() == doctest::Approx(1.0 - p.dt * p.drag_k * (1.0 - self / p.rest_density)).epsilon(1e-14));
    CHECK(u[0].y() == 0.0);
}

TEST_CASE("no drag inside dense fluid")
{
    FluidParams p = test_params(1.0);
    p.buoyancy_alpha = 0.0;
    PhysicalParticleSet block;
    block.positions = lattice(7, 0.4 * p.kernel.radius);
    block.velocities.assign(block.size(), Vec3(1.0, -2.0, 0.5));
    const auto rho = densities(block.positions, p.kernel.radius);
    const auto u = predict_velocities(block, p, ExternalForceField::none());
    int dense = 0;
    for (std::size_t i = 0; i < block.size(); ++i) {
        if (rho[i] >= p.rest_density) {
            ++dense;
            CHECK(u[i] == block.velocities[i]);
        }
    }
    CHECK(dense > 0);
}

TEST_CASE("drag is dissipative toward the environment velocity")
{
    Rng rng(31);
    FluidParams p = test_params(0.5);
    p.buoyancy_alpha = 0.0;
    p.env_velocity = Vec3(0.5, 0.0, -0.5);
    PhysicalParticleSet s = random_physical(rng, 40, Aabb{Vec3::Zero(), Vec3::Constant(30.0)}, 4.0);
    const auto u = predict_velocities(s, p, ExternalForceField::none());
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            CHECK(std::abs(u[i][a] - p.env_velocity[a]) <= std::abs(s.velocities[i][a] - p.env_velocity[a]));
        }
    }
}

TEST_CASE("projection leaves a rest-spaced block in place")
{
    const FluidParams p = rest_params();
    const auto pts = rest_block(p, 8);
    const auto out = project_constraints(pts, p);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK((out[i] - pts[i]).norm() <= 1e-9 * p.kernel.radius);
    }
}

TEST_CASE("coincident particles separate symmetrically")
{
    FluidParams p = test_params(1.0);
    const std::vector<Vec3> pts = {Vec3(1.0, 2.0, 3.0), Vec3(1.0, 2.0, 3.0)};
    const auto out = project_constraints(pts, p);
    const Vec3 d0 = out[0] - pts[0];
    const Vec3 d1 = out[1] - pts[1];
    CHECK(d0.norm() > 0.0);
    CHECK((d0 + d1).norm() <= 1e-12 * d0.norm());
    CHECK(out == project_constraints(pts, p));
}

TEST_CASE("projection reduces compression and conserves the centre of mass")
{
    Rng rng(32);
    FluidParams p = test_params(1.0);
    p.rest_density = 2.0;
    p.kernel.radius = default_kernel_radius(p.rest_density);
    const Real h = p.kernel.radius;
    for (int trial = 0; trial < 3; ++trial) {
        // 500 particles in a ball at about three times the rest density.
        const Real radius = std::cbrt(3.0 * 500.0 / (4.0 * 3.14159 * 3.0 * p.rest_density));
        std::vector<Vec3> pts;
        while (pts.size() < 500) {
            const Vec3 q = uniform_vec(rng, -radius, radius);
            if (q.norm() <= radius) {
                pts.push_back(q);
            }
        }
        auto worst = [&](const std::vector<Vec3>& x) {
            Real m = 0.0;
            for (Real r : densities(x, h)) {
                m = std::max(m, std::abs(r / p.rest_density - 1.0));
            }
            return m;
        };
        const auto out = project_constraints(pts, p);
        CHECK(worst(out) <= 0.5 * worst(pts));
        Vec3 sum = Vec3::Zero();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            sum += out[i] - pts[i];
        }
        CHECK(sum.norm() <= 1e-9 * h * static_cast<Real>(pts.size()));
    }
}

TEST_CASE("sim_step examples")
{
    SUBCASE("still block stays put")
    {
        FluidParams p = rest_params();
        p.buoyancy_alpha = 0.0;
        PhysicalParticleSet s;
        s.positions = rest_block(p, 6);
        s.velocities.assign(s.size(), Vec3::Zero());
        const auto out = sim_step(s, p, ExternalForceField::none(), nullptr);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK((out.positions[i] - s.positions[i]).norm() <= 1e-9 * p.kernel.radius);
        }
    }
    SUBCASE("isolated particle rises by dt^2 |alpha g|")
    {
        FluidParams p = test_params(1.0);
        PhysicalParticleSet s;
        s.positions = {Vec3(0.0, 5.0, 0.0)};
        s.velocities = {Vec3::Zero()};
        const auto out = sim_step(s, p, ExternalForceField::none(), nullptr);
        CHECK(out.positions[0].y() - 5.0 == doctest::Approx(p.dt * p.dt * 3.0 * 9.8).epsilon(1e-12));
        CHECK(out.velocities[0].y() == doctest::Approx(p.dt * 3.0 * 9.8).epsilon(1e-12));
    }
}

TEST_CASE("velocities are the position change over dt")
{
    Rng rng(33);
    FluidParams p = test_params(1.0);
    PhysicalParticleSet s = random_physical(rng, 200, Aabb{Vec3::Zero(), Vec3::Constant(3.0)}, 2.0);
    const auto out = sim_step(s, p, ExternalForceField::none(), nullptr);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK((out.velocities[i] - (out.positions[i] - s.positions[i]) / p.dt).norm() <= 1e-12);
    }
}

TEST_CASE("particles leaving the domain are clamped and flagged")
{
    FluidParams p = test_params(1.0);
    p.domain = Aabb{Vec3::Zero(), Vec3::Constant(2.0)};
    PhysicalParticleSet s;
    s.positions = {Vec3(1.0, 1.99, 1.0)};
    s.velocities = {Vec3(0.0, 30.0, 0.0)};
    SimDiagnostics diag;
    const auto out = sim_step(s, p, ExternalForceField::none(), nullptr, &diag);
    CHECK(diag.domain_escape);
    CHECK(diag.clamped == 1);
    CHECK(out.positions[0].y() == 2.0);
}

TEST_CASE("sim_step is translation equivariant")
{
    Rng rng(34);
    FluidParams p = test_params(1.0);
    p.domain = Aabb{Vec3::Constant(-50.0), Vec3::Constant(50.0)};
    PhysicalParticleSet s = random_physical(rng, 300, Aabb{Vec3::Zero(), Vec3::Constant(2.5)}, 1.0);
    const Vec3 d(4.0, -8.0, 2.0);
    PhysicalParticleSet t = s;
    for (Vec3& q : t.positions) {
        q += d;
    }
    FluidParams pt = p;
    pt.domain = p.domain.translated(d);
    const auto a = sim_step(s, p, ExternalForceField::none(), nullptr);
    const auto b = sim_step(t, pt, ExternalForceField::none(), nullptr);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK((b.positions[i] - d - a.positions[i]).norm() <= 1e-9);
    }
}

TEST_CASE("emission and stabilization")
{
    FluidParams p = test_params(1.0);
    SourceSpec src;
    src.box = Aabb{Vec3(-1.0, 0.5, -1.0), Vec3(1.0, 1.5, 1.0)};
    src.seeds_per_step = 10;
    src.visual_seeds_per_step = 7;
    src.rng_seed = 5;

    const auto [phys, vis] = stabilize(src, p, 0);
    CHECK(phys.size() == 10);
    CHECK(vis.size() == 7);
    for (const Vec3& q : phys.positions) {
        CHECK(src.contains(q));
        CHECK(src.box.contains(q));
    }
    for (std::size_t i = 0; i < vis.size(); ++i) {
        CHECK(vis.colors[i] == src.visual.color);
        CHECK(vis.opacities[i] == src.visual.opacity);
    }

    const auto again = stabilize(src, p, 20);
    const auto twice = stabilize(src, p, 20);
    CHECK(again.first.positions == twice.first.positions);
    CHECK(again.second.positions == twice.second.positions);
    CHECK(again.first.size() == 210);

    SourceSpec other = src;
    other.rng_seed = 6;
    CHECK(stabilize(other, p, 0).first.positions != phys.positions);

    const Emission capped = emit(src, 3, p.max_particles - 4, 0, p.max_particles);
    CHECK(capped.physical.size() == 4);
}

TEST_CASE("spherical source seeds inside the sphere")
{
    SourceSpec src;
    src.shape = SourceSpec::Shape::Sphere;
    src.center = Vec3(0.0, 3.0, 0.0);
    src.radius = 1.5;
    for (const Vec3& q : seed_positions(src, 200, 4, 0)) {
        CHECK((q - src.center).norm() <= src.radius);
    }
}

TEST_CASE("forward steps are bit-identical across runs and thread counts")
{
    FluidParams p = test_params(1.0);
    p.kernel.radius = default_kernel_radius(p.rest_density);
    SourceSpec src;
    src.seeds_per_step = 200;
    src.rng_seed = 9;
    SimContext ctx;
    ctx.params = p;
    auto run = [&](int threads) {
        set_thread_count(threads);
        auto [phys, vis] = stabilize(src, p, 5);
        FluidState s{phys, vis};
        for (int k = 0; k < 15; ++k) {
            s = advance_state(s, ctx, src, 6 + k);
        }
        return s;
    };
    const FluidState a = run(1);
    const FluidState b = run(1);
    const FluidState c = run(4);
    set_thread_count(1);
    CHECK(a.physical.positions == b.physical.positions);
    CHECK(a.physical.positions == c.physical.positions);
    CHECK(a.physical.velocities == c.physical.velocities);
    CHECK(a.visual.positions == c.visual.positions);
}

}  // TEST_SUITE
