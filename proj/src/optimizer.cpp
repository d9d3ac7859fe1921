// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/optimizer.hpp"

#include "fluidrec/error.hpp"

#include <cmath>

namespace fluidrec {

void OptimizerConfig::validate() const
{
    if (!(position_step > 0.0) || !(appearance_step > 0.0) || !(gradient_clip > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "optimizer steps and clip must be positive");
    }
    if (iterations_dynamics < 0 || iterations_appearance < 0 || max_halvings < 0) {
        throw Error(ErrorCode::InvalidArgument, "optimizer iteration counts must be non-negative");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0) || !(min_scale > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "optimizer moments need beta in [0, 1), epsilon > 0");
    }
}

OptimizeResult minimize(Eigen::VectorXd& x, const Objective& f, const Projection& project, Real step,
                        int iterations, const OptimizerConfig& cfg)
{
    OptimizeResult res;
    if (iterations <= 0 || x.size() == 0) {
        res.initial = res.final = f(x, nullptr);
        res.evaluations = 1;
        return res;
    }
    Eigen::VectorXd g(x.size());
    Real fx = f(x, &g);
    res.initial = fx;
    res.evaluations = 1;

    Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd cand(x.size()), g_cand(x.size());
    int t = 0;
    Real lr = step;
    for (int it = 0; it < iterations; ++it) {
        const Real gn = g.norm();
        const Eigen::VectorXd gc = gn > cfg.gradient_clip ? Eigen::VectorXd(g * (cfg.gradient_clip / gn)) : g;
        Eigen::VectorXd m_next = m, v_next = v;
        if (cfg.method == OptimizerMethod::AdaptiveMoment) {
            m_next = cfg.beta1 * m + (1.0 - cfg.beta1) * gc;
            v_next = cfg.beta2 * v + (1.0 - cfg.beta2) * gc.cwiseProduct(gc);
            const Real b1 = 1.0 - std::pow(cfg.beta1, t + 1);
            const Real b2 = 1.0 - std::pow(cfg.beta2, t + 1);
            cand = x - lr * ((m_next / b1).array() / ((v_next / b2).array().sqrt() + cfg.epsilon)).matrix();
        } else {
            cand = x - lr * gc;
        }
        if (project) {
            project(cand);
        }
        const Real fc = f(cand, &g_cand);
        ++res.evaluations;
        if (fc <= fx) {
            x.swap(cand);
            g.swap(g_cand);
            fx = fc;
            m.swap(m_next);
            v.swap(v_next);
            ++t;
            ++res.accepted;
        } else {
            if (res.halvings >= cfg.max_halvings) {
                break;
            }
            lr *= 0.5;
            ++res.halvings;
        }
    }
    res.final = fx;
    return res;
}

}  // namespace fluidrec
