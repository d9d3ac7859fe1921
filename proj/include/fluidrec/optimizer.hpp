// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/vec.hpp"

#include <Eigen/Core>

#include <functional>

namespace fluidrec {

enum class OptimizerMethod { GradientDescent, AdaptiveMoment };

struct OptimizerConfig {
    OptimizerMethod method = OptimizerMethod::AdaptiveMoment;
    Real position_step = 1e-3;  // multiplied by the kernel radius
    Real appearance_step = 1e-2;
    int iterations_dynamics = 100;
    int iterations_appearance = 100;
    Real gradient_clip = 100.0;  // L2 norm of the whole gradient
    Real beta1 = 0.9;
    Real beta2 = 0.999;
    Real epsilon = 1e-8;
    int max_halvings = 5;
    /// Lower bound enforced on visual scales after each appearance step.
    Real min_scale = 1e-3;

    /// Zero iterations are allowed (the stage becomes a passthrough).
    void validate() const;
};

using Objective = std::function<Real(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;
using Projection = std::function<void(Eigen::VectorXd& x)>;

struct OptimizeResult {
    Real initial = 0.0;
    Real final = 0.0;
    int evaluations = 0;
    int accepted = 0;
    int halvings = 0;
};

/// First-order descent with accept-if-improved stepping: a candidate that
/// raises the objective is discarded, the moments are restored, and the step
/// size halves. Stops after `iterations` candidates or the halving budget.
/// `project` (optional) maps each candidate back to the feasible set.
OptimizeResult minimize(Eigen::VectorXd& x, const Objective& f, const Projection& project, Real step,
                        int iterations, const OptimizerConfig& cfg);

}  // namespace fluidrec
