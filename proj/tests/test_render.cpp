// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support.hpp"

#include "fluidrec/render.hpp"

#include <numeric>

using namespace fluidrec;
using namespace fluidrec::test;

namespace {

Camera front_camera(int size = 32, Real focal = 40.0)
{
    return Camera::look_at(Vec3(0.0, 0.0, -5.0), Vec3::Zero(), Vec3::UnitY(), focal, size, size);
}

VisualParticleSet single(const Vec3& x, const Vec3& color, Real scale, Real opacity)
{
    VisualParticleSet v;
    v.positions = {x};
    v.colors = {color};
    v.scales = {Vec3::Constant(scale)};
    v.opacities = {opacity};
    v.rotations = {Quat(1.0, 0.0, 0.0, 0.0)};
    return v;
}

Real dot(const Image& a, const Image& b)
{
    return std::inner_product(a.data.begin(), a.data.end(), b.data.begin(), 0.0);
}

Image random_image(Rng& rng, int w, int h)
{
    Image img(w, h, 3);
    for (Real& s : img.data) {
        s = uniform(rng, -1.0, 1.0);
    }
    return img;
}

}  // namespace

TEST_SUITE("render") {

TEST_CASE("no particles returns the background")
{
    Rng rng(51);
    const Camera cam = front_camera();
    Image bg(32, 32, 3);
    for (Real& s : bg.data) {
        s = uniform(rng, 0.0, 1.0);
    }
    CHECK(render(VisualParticleSet{}, cam, bg).data == bg.data);
    const Image flat = render(VisualParticleSet{}, cam, Vec3(0.1, 0.2, 0.3));
    CHECK(flat.at(5, 7, 1) == 0.2);
}

TEST_CASE("splat on the optical axis peaks at the principal point")
{
    const Camera cam = front_camera(33);
    const Image img = render(single(Vec3::Zero(), Vec3::Ones(), 0.2, 1.0), cam, Vec3::Zero());
    int bx = -1, by = -1;
    Real best = -1.0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (img.at(x, y, 0) > best) {
                best = img.at(x, y, 0);
                bx = x;
                by = y;
            }
        }
    }
    CHECK(bx == static_cast<int>(cam.cx));
    CHECK(by == static_cast<int>(cam.cy));
    CHECK(best > 0.95);
}

TEST_CASE("an opaque near splat hides a far one")
{
    // Odd size puts the principal point on a pixel centre.
    const Camera cam = front_camera(33);
    VisualParticleSet v = single(Vec3(0.0, 0.0, -1.0), Vec3(1.0, 0.0, 0.0), 0.3, 1.0);
    v.append(single(Vec3(0.0, 0.0, 1.0), Vec3(0.0, 1.0, 0.0), 0.3, 1.0));
    const Image img = render(v, cam, Vec3::Zero());
    const int c = static_cast<int>(cam.cx);
    CHECK(img.at(c, c, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(img.at(c, c, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("particles behind the camera are culled")
{
    const Camera cam = front_camera();
    const Image img = render(single(Vec3(0.0, 0.0, -8.0), Vec3::Ones(), 0.5, 1.0), cam, Vec3::Zero());
    CHECK(*std::max_element(img.data.begin(), img.data.end()) == 0.0);
}

TEST_CASE("outputs stay in the unit range and ignore storage order")
{
    Rng rng(52);
    const Camera cam = front_camera(40);
    for (int trial = 0; trial < 5; ++trial) {
        VisualParticleSet v = random_visual(rng, 60, Aabb{Vec3::Constant(-1.5), Vec3::Constant(1.5)}, 0.05, 0.6);
        for (Real& o : v.opacities) {
            o = uniform(rng, 0.0, 1.0);
        }
        v.opacities[0] = 1.0;
        v.colors[1] = Vec3::Ones();
        Image bg(40, 40, 3);
        for (Real& s : bg.data) {
            s = uniform(rng, 0.0, 1.0);
        }
        const Image img = render(v, cam, bg);
        for (Real s : img.data) {
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
        std::vector<std::size_t> perm(v.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        VisualParticleSet w;
        w.resize(v.size());
        for (std::size_t i = 0; i < perm.size(); ++i) {
            w.positions[i] = v.positions[perm[i]];
            w.colors[i] = v.colors[perm[i]];
            w.scales[i] = v.scales[perm[i]];
            w.opacities[i] = v.opacities[perm[i]];
            w.rotations[i] = v.rotations[perm[i]];
        }
        CHECK(render(w, cam, bg).data == img.data);
    }
}

TEST_CASE("zero adjoint gives zero gradients")
{
    Rng rng(53);
    const Camera cam = front_camera();
    const VisualParticleSet v = random_visual(rng, 8, Aabb{Vec3::Constant(-1.0), Vec3::Constant(1.0)}, 0.1, 0.4);
    const Image bg = Image::flat(32, 32, Vec3(0.2, 0.2, 0.2));
    const RenderGradients g = render_grad(v, cam, bg, Image(32, 32, 3));
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(g.positions[i] == Vec3::Zero());
        CHECK(g.colors[i] == Vec3::Zero());
        CHECK(g.scales[i] == Vec3::Zero());
        CHECK(g.opacities[i] == 0.0);
        CHECK(g.rotations[i] == Quat::Zero());
    }
}

TEST_CASE("a splat is pulled toward a shifted target")
{
    const Camera cam = front_camera();
    const Image bg = Image::flat(32, 32, Vec3::Zero());
    const Image target = render(single(Vec3(0.3, 0.0, 0.0), Vec3::Ones(), 0.3, 0.8), cam, bg);
    const VisualParticleSet v = single(Vec3::Zero(), Vec3::Ones(), 0.3, 0.8);
    SplatRenderer r(v, cam, bg);
    Image adj = r.image();
    for (std::size_t i = 0; i < adj.size(); ++i) {
        adj.data[i] = 2.0 * (adj.data[i] - target.data[i]);
    }
    const RenderGradients g = r.backward(adj);
    // Gradient descent moves along -g, which must head toward +x.
    CHECK(g.positions[0].x() < 0.0);
    CHECK(std::abs(g.positions[0].x()) > 10.0 * std::abs(g.positions[0].y()));
}

TEST_CASE("render gradients match central differences")
{
    Rng rng(54);
    const Real step = 1e-4;
    for (int trial = 0; trial < 4; ++trial) {
        const Camera cam = Camera::look_at(uniform_vec(rng, -1.0, 1.0) + Vec3(0.0, 0.0, -5.0), Vec3::Zero(),
                                           Vec3::UnitY(), 36.0, 32, 32);
        const VisualParticleSet v =
            random_visual(rng, 16, Aabb{Vec3::Constant(-1.0), Vec3::Constant(1.0)}, 0.15, 0.45);
        Image bg(32, 32, 3);
        for (Real& s : bg.data) {
            s = uniform(rng, 0.0, 1.0);
        }
        const Image adj = random_image(rng, 32, 32);
        const RenderGradients g = render_grad(v, cam, bg, adj);

        auto loss = [&](const VisualParticleSet& s) { return dot(render(s, cam, bg), adj); };
        auto check_vec3 = [&](std::vector<Vec3> VisualParticleSet::*field, const std::vector<Vec3>& analytic) {
            const Eigen::VectorXd fd = central_gradient(
                [&](const Eigen::VectorXd& x) {
                    VisualParticleSet s = v;
                    s.*field = unflatten(x);
                    return loss(s);
                },
                flatten(v.*field), step);
            return gradient_error(flatten(analytic), fd);
        };
        CHECK(check_vec3(&VisualParticleSet::positions, g.positions) <= 1e-3);
        CHECK(check_vec3(&VisualParticleSet::colors, g.colors) <= 1e-3);
        CHECK(check_vec3(&VisualParticleSet::scales, g.scales) <= 1e-3);

        Eigen::VectorXd op = Eigen::Map<const Eigen::VectorXd>(v.opacities.data(), 16);
        const Eigen::VectorXd fd_o = central_gradient(
            [&](const Eigen::VectorXd& x) {
                VisualParticleSet s = v;
                s.opacities.assign(x.data(), x.data() + x.size());
                return loss(s);
            },
            op, step);
        CHECK(gradient_error(Eigen::Map<const Eigen::VectorXd>(g.opacities.data(), 16), fd_o) <= 1e-3);

        Eigen::VectorXd rq(64), ga(64);
        for (int i = 0; i < 16; ++i) {
            rq.segment<4>(4 * i) = v.rotations[static_cast<std::size_t>(i)];
            ga.segment<4>(4 * i) = g.rotations[static_cast<std::size_t>(i)];
        }
        const Eigen::VectorXd fd_r = central_gradient(
            [&](const Eigen::VectorXd& x) {
                VisualParticleSet s = v;
                for (int i = 0; i < 16; ++i) {
                    s.rotations[static_cast<std::size_t>(i)] = x.segment<4>(4 * i);
                }
                return loss(s);
            },
            rq, step);
        CHECK(gradient_error(ga, fd_r) <= 1e-3);
    }
}

TEST_CASE("quaternion rotation matrix is orthonormal")
{
    Rng rng(55);
    for (int i = 0; i < 20; ++i) {
        const Quat q = 3.0 * random_unit_quat(rng);
        const Mat3 r = quaternion_to_matrix(q);
        CHECK((r * r.transpose() - Mat3::Identity()).norm() <= 1e-12);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

}  // TEST_SUITE
