// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/image.hpp"
#include "fluidrec/particles.hpp"
#include "fluidrec/pbf.hpp"

#include <span>
#include <vector>

namespace fluidrec {

enum class PairDistance { Squared, Euclidean };

struct LossWeights {
    Real lambda_sim = 0.1;
    Real lambda_next = 0.1;
    Real lambda_v_incomp = 0.1;
    /// Threshold compared against the pair distance; <= 0 selects
    /// (0.5 * rest spacing)^2 for Squared and 0.5 * rest spacing for Euclidean.
    Real sigma_min_dist = 0.0;
    PairDistance pair_distance = PairDistance::Squared;
    DensityPenalty density_penalty = DensityPenalty::OverDense;
    Real lambda_c = 10.0;
    Real lambda_s = 0.0;
    Real lambda_o = 8.0;
    Real lambda_r = 0.1;
    Real aniso_max_ratio = 4.0;
    /// Global multiplier on the image terms.
    Real visual_weight = 1.0;
    /// Projection iterations differentiated in the next-step density term.
    int next_backprop_iters = 1;

    void validate() const;
    Real sigma(const FluidParams& params) const;
};

/// Per-term values of one evaluation. `total` follows weighted_total().
struct LossReport {
    Real sim = 0.0;
    Real incomp_now = 0.0;
    Real incomp_next = 0.0;
    Real incomp_visual = 0.0;
    Real visual_l1 = 0.0;
    Real visual_ssim = 0.0;
    Real reg = 0.0;
    Real aniso = 0.0;
    Real total = 0.0;

    // Gradient buffers; unused groups stay empty.
    std::vector<Vec3> grad_physical_positions;
    std::vector<Vec3> grad_visual_positions;
    std::vector<Vec3> grad_colors;
    std::vector<Vec3> grad_scales;
    std::vector<Real> grad_opacities;
    std::vector<Quat> grad_rotations;
};

/// lambda_sim sim + incomp_now + lambda_next incomp_next
/// + lambda_v_incomp incomp_visual + visual_weight (visual_l1 + visual_ssim)
/// + reg + aniso. `reg` already carries its per-attribute weights.
Real weighted_total(const LossReport& r, const LossWeights& w);

/// sum |p - p_sim|^2. Throws Error(LengthMismatch).
Real loss_sim(std::span<const Vec3> p, std::span<const Vec3> p_sim, std::vector<Vec3>* grad);

/// Unordered pairs with distance below sigma: sum max(0, sigma - d)^2.
Real visual_pair_loss(std::span<const Vec3> x, Real sigma, PairDistance mode, std::vector<Vec3>* grad);

struct IncompTerms {
    Real now = 0.0;
    Real next = 0.0;
    Real visual = 0.0;
    Real value = 0.0;  // now + lambda_next next + lambda_v_incomp visual
};

/// The three incompressibility terms for state (p_t, u_t) and visual
/// positions x_t. Gradients are returned per independent input; callers
/// chain u_t = (p_t - p_{t-1}) / dt and x_t = Adv(V_t, x_{t-1}) themselves.
IncompTerms loss_incomp(const PhysicalParticleSet& state, std::span<const Vec3> x, const SimContext& ctx,
                        const LossWeights& w, std::vector<Vec3>* grad_p, std::vector<Vec3>* grad_u,
                        std::vector<Vec3>* grad_x);

struct VisualTerms {
    Real l1 = 0.0;    // sum over views of the mean absolute difference
    Real ssim = 0.0;  // sum over views of (1 - SSIM)
};

/// Throws Error(DimensionMismatch) when view counts or shapes differ.
/// `adjoints` receives d (l1 + ssim) / d rendered per view.
VisualTerms loss_visual(const std::vector<Image>& rendered, const std::vector<Image>& reference,
                        std::vector<Image>* adjoints);

struct RegTerms {
    Real l2 = 0.0;  // weighted temporal differences
    Real aniso = 0.0;
};

/// Temporal smoothness against the previous attributes plus the anisotropy
/// penalty sum max(0, max_scale / min_scale - ratio)^2. Positions are
/// ignored. Gradients land in the report's appearance buffers.
RegTerms loss_reg(const VisualParticleSet& cur, const VisualParticleSet& prev, const LossWeights& w,
                  LossReport* grads);

}  // namespace fluidrec
