// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/losses.hpp"

#include "fluidrec/error.hpp"
#include "fluidrec/neighbor_grid.hpp"
#include "fluidrec/parallel.hpp"
#include "fluidrec/ssim.hpp"

#include <cmath>

namespace fluidrec {

void LossWeights::validate() const
{
    const Real vals[] = {lambda_sim, lambda_next, lambda_v_incomp, lambda_c, lambda_s, lambda_o, lambda_r, visual_weight};
    for (Real v : vals) {
        if (!std::isfinite(v) || v < 0.0) {
            throw Error(ErrorCode::InvalidArgument, "loss weights must be finite and non-negative");
        }
    }
    if (!std::isfinite(sigma_min_dist) || !(aniso_max_ratio >= 1.0) || next_backprop_iters < 0) {
        throw Error(ErrorCode::InvalidArgument, "need finite sigma, aniso ratio >= 1, backprop iters >= 0");
    }
}

Real LossWeights::sigma(const FluidParams& params) const
{
    if (sigma_min_dist > 0.0) {
        return sigma_min_dist;
    }
    const Real half = 0.5 * rest_spacing(params.rest_density);
    return pair_distance == PairDistance::Squared ? half * half : half;
}

Real weighted_total(const LossReport& r, const LossWeights& w)
{
    return w.lambda_sim * r.sim + r.incomp_now + w.lambda_next * r.incomp_next + w.lambda_v_incomp * r.incomp_visual +
           w.visual_weight * (r.visual_l1 + r.visual_ssim) + r.reg + r.aniso;
}

Real loss_sim(std::span<const Vec3> p, std::span<const Vec3> p_sim, std::vector<Vec3>* grad)
{
    if (p.size() != p_sim.size()) {
        throw Error(ErrorCode::LengthMismatch, "loss_sim needs equal-length position arrays");
    }
    Real sum = 0.0;
    if (grad) {
        grad->resize(p.size());
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Vec3 d = p[i] - p_sim[i];
        sum += d.squaredNorm();
        if (grad) {
            (*grad)[i] = 2.0 * d;
        }
    }
    return sum;
}

Real visual_pair_loss(std::span<const Vec3> x, Real sigma, PairDistance mode, std::vector<Vec3>* grad)
{
    const std::size_t n = x.size();
    if (grad) {
        grad->assign(n, Vec3::Zero());
    }
    if (n < 2 || !(sigma > 0.0)) {
        return 0.0;
    }
    const bool squared = mode == PairDistance::Squared;
    const Real reach = squared ? std::sqrt(sigma) : sigma;
    const HashGrid grid = HashGrid::build(x, reach);
    // Per-particle half sums keep the result independent of thread count.
    std::vector<Real> half(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        Real v = 0.0;
        Vec3 g = Vec3::Zero();
        grid.for_each_candidate(x[i], [&](std::uint32_t j) {
            if (j == i) {
                return;
            }
            const Vec3 r = x[i] - x[j];
            const Real q2 = r.squaredNorm();
            const Real d = squared ? q2 : std::sqrt(q2);
            if (d >= sigma) {
                return;
            }
            const Real gap = sigma - d;
            v += gap * gap;
            if (squared) {
                g += -4.0 * gap * r;
            } else if (d > 0.0) {
                g += (-2.0 * gap / d) * r;
            }
        });
        half[i] = 0.5 * v;
        if (grad) {
            (*grad)[i] = g;
        }
    });
    Real sum = 0.0;
    for (Real v : half) {
        sum += v;
    }
    return sum;
}

IncompTerms loss_incomp(const PhysicalParticleSet& state, std::span<const Vec3> x, const SimContext& ctx,
                        const LossWeights& w, std::vector<Vec3>* grad_p, std::vector<Vec3>* grad_u,
                        std::vector<Vec3>* grad_x)
{
    IncompTerms t;
    const std::size_t n = state.size();
    std::vector<Vec3> g_now;
    t.now = density_deviation_loss(state.positions, ctx.params, grad_p ? &g_now : nullptr, w.density_penalty);

    std::vector<Vec3> g_next_p, g_next_u;
    if (w.lambda_next > 0.0) {
        t.next = next_density_loss(state, ctx, w.next_backprop_iters, grad_p ? &g_next_p : nullptr,
                                   grad_u ? &g_next_u : nullptr, w.density_penalty);
    }
    std::vector<Vec3> g_pair;
    if (w.lambda_v_incomp > 0.0) {
        t.visual = visual_pair_loss(x, w.sigma(ctx.params), w.pair_distance, grad_x ? &g_pair : nullptr);
    }
    t.value = t.now + w.lambda_next * t.next + w.lambda_v_incomp * t.visual;

    if (grad_p) {
        grad_p->assign(n, Vec3::Zero());
        for (std::size_t i = 0; i < n; ++i) {
            (*grad_p)[i] = g_now[i];
            if (!g_next_p.empty()) {
                (*grad_p)[i] += w.lambda_next * g_next_p[i];
            }
        }
    }
    if (grad_u) {
        grad_u->assign(n, Vec3::Zero());
        for (std::size_t i = 0; i < g_next_u.size(); ++i) {
            (*grad_u)[i] = w.lambda_next * g_next_u[i];
        }
    }
    if (grad_x) {
        grad_x->assign(x.size(), Vec3::Zero());
        for (std::size_t i = 0; i < g_pair.size(); ++i) {
            (*grad_x)[i] = w.lambda_v_incomp * g_pair[i];
        }
    }
    return t;
}

VisualTerms loss_visual(const std::vector<Image>& rendered, const std::vector<Image>& reference,
                        std::vector<Image>* adjoints)
{
    if (rendered.size() != reference.size()) {
        throw Error(ErrorCode::DimensionMismatch, "rendered and reference view counts differ");
    }
    VisualTerms t;
    if (adjoints) {
        adjoints->resize(rendered.size());
    }
    for (std::size_t v = 0; v < rendered.size(); ++v) {
        const Image& a = rendered[v];
        const Image& b = reference[v];
        require_same_shape(a, b);
        const Real inv = 1.0 / static_cast<Real>(a.size());
        Real l1 = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            l1 += std::abs(a.data[k] - b.data[k]);
        }
        t.l1 += l1 * inv;
        Image* adj = adjoints ? &(*adjoints)[v] : nullptr;
        Image g;
        t.ssim += 1.0 - ssim_with_grad(a, b, adj ? &g : nullptr);
        if (adj) {
            *adj = Image(a.width, a.height, a.channels, 0.0);
            for (std::size_t k = 0; k < a.size(); ++k) {
                const Real d = a.data[k] - b.data[k];
                const Real sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                adj->data[k] = sign * inv - g.data[k];
            }
        }
    }
    return t;
}

RegTerms loss_reg(const VisualParticleSet& cur, const VisualParticleSet& prev, const LossWeights& w,
                  LossReport* grads)
{
    const std::size_t n = cur.size();
    if (prev.size() != n || cur.colors.size() != n || cur.scales.size() != n || cur.opacities.size() != n ||
        cur.rotations.size() != n) {
        throw Error(ErrorCode::LengthMismatch, "loss_reg needs aligned attribute arrays");
    }
    if (grads) {
        grads->grad_colors.assign(n, Vec3::Zero());
        grads->grad_scales.assign(n, Vec3::Zero());
        grads->grad_opacities.assign(n, 0.0);
        grads->grad_rotations.assign(n, Quat::Zero());
    }
    RegTerms t;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 dc = cur.colors[i] - prev.colors[i];
        const Vec3 ds = cur.scales[i] - prev.scales[i];
        const Real dop = cur.opacities[i] - prev.opacities[i];
        const Quat dr = cur.rotations[i] - prev.rotations[i];
        t.l2 += w.lambda_c * dc.squaredNorm() + w.lambda_s * ds.squaredNorm() + w.lambda_o * dop * dop +
                w.lambda_r * dr.squaredNorm();
        const Vec3& s = cur.scales[i];
        int kmax = 0, kmin = 0;
        for (int k = 1; k < 3; ++k) {
            if (s[k] > s[kmax]) kmax = k;
            if (s[k] < s[kmin]) kmin = k;
        }
        const Real ratio = s[kmax] / s[kmin];
        const Real excess = ratio - w.aniso_max_ratio;
        if (excess > 0.0) {
            t.aniso += excess * excess;
        }
        if (grads) {
            grads->grad_colors[i] = 2.0 * w.lambda_c * dc;
            grads->grad_scales[i] = 2.0 * w.lambda_s * ds;
            grads->grad_opacities[i] = 2.0 * w.lambda_o * dop;
            grads->grad_rotations[i] = 2.0 * w.lambda_r * dr;
            if (excess > 0.0) {
                grads->grad_scales[i][kmax] += 2.0 * excess / s[kmin];
                grads->grad_scales[i][kmin] -= 2.0 * excess * s[kmax] / (s[kmin] * s[kmin]);
            }
        }
    }
    return t;
}

}  // namespace fluidrec
