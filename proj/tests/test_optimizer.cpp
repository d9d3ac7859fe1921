// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support.hpp"

#include "fluidrec/optimizer.hpp"

using namespace fluidrec;
using namespace fluidrec::test;

namespace {

/// 0.5 (x - c)^T D (x - c) with positive diagonal D.
struct Quadratic {
    Eigen::VectorXd c;
    Eigen::VectorXd d;

    Real operator()(const Eigen::VectorXd& x, Eigen::VectorXd* g) const
    {
        const Eigen::VectorXd r = x - c;
        if (g) {
            *g = d.cwiseProduct(r);
        }
        return 0.5 * r.dot(d.cwiseProduct(r));
    }
};

Quadratic random_quadratic(Rng& rng, int n)
{
    Quadratic q{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (int i = 0; i < n; ++i) {
        q.c[i] = uniform(rng, -1.0, 1.0);
        q.d[i] = uniform(rng, 0.5, 4.0);
    }
    return q;
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("both methods drive a quadratic toward its minimum")
{
    Rng rng(71);
    for (OptimizerMethod method : {OptimizerMethod::GradientDescent, OptimizerMethod::AdaptiveMoment}) {
        const Quadratic q = random_quadratic(rng, 12);
        OptimizerConfig cfg;
        cfg.method = method;
        cfg.max_halvings = 20;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(12);
        const Real step = method == OptimizerMethod::GradientDescent ? 0.2 : 0.01;
        const OptimizeResult r = minimize(x, q, nullptr, step, 400, cfg);
        CHECK(r.final <= 1e-3 * r.initial);
        CHECK(r.final == doctest::Approx(q(x, nullptr)).epsilon(1e-15));
        CHECK(r.accepted > 0);
    }
}

TEST_CASE("accepted objective never increases")
{
    Rng rng(72);
    const Quadratic q = random_quadratic(rng, 6);
    OptimizerConfig cfg;
    cfg.method = OptimizerMethod::GradientDescent;
    std::vector<Real> seen;
    const Objective tracked = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        const Real v = q(x, g);
        seen.push_back(v);
        return v;
    };
    // A step far past the stable range forces rejections and halvings.
    Eigen::VectorXd x = Eigen::VectorXd::Constant(6, 3.0);
    const Real f0 = q(x, nullptr);
    const OptimizeResult r = minimize(x, tracked, nullptr, 5.0, 50, cfg);
    CHECK(r.halvings > 0);
    CHECK(r.final <= f0);
    CHECK(r.evaluations == static_cast<int>(seen.size()));
    CHECK(r.final == q(x, nullptr));
}

TEST_CASE("zero iterations evaluate once and leave the parameters alone")
{
    Rng rng(73);
    const Quadratic q = random_quadratic(rng, 4);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(4);
    const Eigen::VectorXd before = x;
    const OptimizeResult r = minimize(x, q, nullptr, 0.1, 0, OptimizerConfig{});
    CHECK(x == before);
    CHECK(r.evaluations == 1);
    CHECK(r.initial == r.final);
}

TEST_CASE("the projection is applied to every candidate")
{
    Rng rng(74);
    Quadratic q = random_quadratic(rng, 5);
    q.c.setConstant(-2.0);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(5);
    const Projection floor = [](Eigen::VectorXd& v) { v = v.cwiseMax(0.5); };
    minimize(x, q, floor, 0.1, 200, OptimizerConfig{});
    CHECK(x.minCoeff() >= 0.5);
    CHECK(x.maxCoeff() == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("halving budget stops a hopeless search")
{
    const Objective uphill = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        // Reported gradient points the wrong way, so every step is rejected.
        if (g) {
            *g = -x;
        }
        return 0.5 * x.squaredNorm();
    };
    OptimizerConfig cfg;
    cfg.max_halvings = 3;
    Eigen::VectorXd x = Eigen::VectorXd::Ones(3);
    const OptimizeResult r = minimize(x, uphill, nullptr, 0.1, 100, cfg);
    CHECK(r.accepted == 0);
    CHECK(r.halvings == 3);
    CHECK(r.evaluations == 5);
    CHECK(x == Eigen::VectorXd::Ones(3));
}

TEST_CASE("optimizer settings are validated")
{
    OptimizerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.iterations_dynamics = 0;
    cfg.iterations_appearance = 0;
    CHECK_NOTHROW(cfg.validate());
    cfg.position_step = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = OptimizerConfig{};
    cfg.beta1 = 1.0;
    CHECK_THROWS(cfg.validate());
}

}  // TEST_SUITE
