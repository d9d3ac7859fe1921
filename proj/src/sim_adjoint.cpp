// SPDX-License-Identifier: Apache-2.0
// Reverse-mode derivative of the simulation operator for the next-step
// density term.
#include "fluidrec/pbf.hpp"

#include "fluidrec/parallel.hpp"

#include <algorithm>

namespace fluidrec {

namespace {

/// Gradient of sum_i (rho_i / rho0 - 1)^2 given per-particle coefficients
/// c_i = d loss / d rho_i:  g_i = sum_j (c_i + c_j) grad W(p_i - p_j).
void scatter_density_adjoint(std::span<const Vec3> pos, const NeighborLists& lists, const Poly6& w,
                             std::span<const Real> coeff, std::span<Vec3> grad)
{
    parallel_for(pos.size(), [&](std::size_t i) {
        Vec3 g = Vec3::Zero();
        for (std::uint32_t j : lists.of(i)) {
            const Real cij = coeff[i] + coeff[j];
            if (cij != 0.0) {
                const Vec3 r = pos[i] - pos[j];
                g += cij * w.gradient(r, r.squaredNorm());
            }
        }
        grad[i] += g;
    });
}

Real deviation_loss(std::span<const Vec3> pos, const NeighborLists& lists, Real h, Real rho0,
                    DensityPenalty penalty, std::vector<Real>* coeff)
{
    const std::vector<Real> rho = particle_densities(pos, lists, h);
    Real sum = 0.0;
    if (coeff) {
        coeff->resize(pos.size());
    }
    for (std::size_t i = 0; i < pos.size(); ++i) {
        Real c = rho[i] / rho0 - 1.0;
        if (penalty == DensityPenalty::OverDense) {
            c = std::max(c, 0.0);
        }
        sum += c * c;
        if (coeff) {
            (*coeff)[i] = 2.0 * c / rho0;
        }
    }
    return sum;
}

/// Adjoint of y -> y + delta(y) for one projection iteration at `y`.
/// `b` is the adjoint of the output; returns the adjoint of the input.
std::vector<Vec3> projection_iteration_adjoint(std::span<const Vec3> y, const NeighborLists& lists,
                                               const FluidParams& params, std::span<const Vec3> b)
{
    const std::size_t n = y.size();
    const Real h = params.kernel.radius;
    const Poly6 w(h);
    const Spiky spiky(h);
    const Real inv_rho0 = 1.0 / params.rest_density;
    const Real eps = params.constraint_epsilon;

    // Forward quantities.
    std::vector<Real> lambda(n, 0.0), denom(n, 0.0), cval(n, 0.0);
    std::vector<unsigned char> active(n, 0);
    std::vector<Vec3> a(n, Vec3::Zero());
    parallel_for(n, [&](std::size_t i) {
        const auto ui = static_cast<std::uint32_t>(i);
        Real rho = w.at_zero();
        Vec3 ai = Vec3::Zero();
        Real sum_sq = 0.0;
        for (std::uint32_t j : lists.of(i)) {
            const Vec3 r = y[i] - y[j];
            rho += w.value_r2(r.squaredNorm());
            const Vec3 g = pair_spiky_gradient(spiky, r, ui, j);
            ai += g;
            sum_sq += g.squaredNorm();
        }
        a[i] = ai;
        const Real c = rho * inv_rho0 - 1.0;
        if (c > 0.0) {
            active[i] = 1;
            cval[i] = c;
            denom[i] = (ai.squaredNorm() + sum_sq) * inv_rho0 * inv_rho0 + eps;
            lambda[i] = -c / denom[i];
        }
    });

    // lambda_bar_i = (1/rho0) sum_j (b_i - b_j) . g_ij
    std::vector<Real> rho_bar(n, 0.0), s_bar(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        if (!active[i]) {
            return;
        }
        const auto ui = static_cast<std::uint32_t>(i);
        Real lb = 0.0;
        for (std::uint32_t j : lists.of(i)) {
            lb += (b[i] - b[j]).dot(pair_spiky_gradient(spiky, y[i] - y[j], ui, j));
        }
        lb *= inv_rho0;
        rho_bar[i] = (-lb / denom[i]) * inv_rho0;
        s_bar[i] = lb * cval[i] / (denom[i] * denom[i]);
    });

    std::vector<Vec3> out(b.begin(), b.end());
    const Real two_inv_rho0_sq = 2.0 * inv_rho0 * inv_rho0;
    parallel_for(n, [&](std::size_t i) {
        const auto ui = static_cast<std::uint32_t>(i);
        Vec3 acc = Vec3::Zero();
        for (std::uint32_t j : lists.of(i)) {
            const Vec3 r = y[i] - y[j];
            const Real r2 = r.squaredNorm();
            const Real rb = rho_bar[i] + rho_bar[j];
            if (rb != 0.0) {
                acc += rb * w.gradient(r, r2);
            }
            const Real q = std::sqrt(r2);
            if (q < 1e-9 * h) {
                continue;  // tie-break direction is constant
            }
            const Vec3 g = pair_spiky_gradient(spiky, r, ui, j);
            const Vec3 gbar_diff = (lambda[i] + lambda[j]) * inv_rho0 * (b[i] - b[j]) +
                                   two_inv_rho0_sq * (s_bar[i] * (a[i] + g) - s_bar[j] * (a[j] - g));
            if (gbar_diff.squaredNorm() > 0.0) {
                acc += spiky.hessian(r, q) * gbar_diff;
            }
        }
        out[i] += acc;
    });
    return out;
}

}  // namespace

Real density_deviation_loss(std::span<const Vec3> positions, const FluidParams& params, std::vector<Vec3>* grad,
                            DensityPenalty penalty)
{
    const Real h = params.kernel.radius;
    const NeighborLists lists = build_neighbor_lists(positions, h);
    std::vector<Real> coeff;
    const Real value = deviation_loss(positions, lists, h, params.rest_density, penalty, grad ? &coeff : nullptr);
    if (grad) {
        grad->assign(positions.size(), Vec3::Zero());
        scatter_density_adjoint(positions, lists, Poly6(h), coeff, *grad);
    }
    return value;
}

Real next_density_loss(const PhysicalParticleSet& state, const SimContext& ctx, int backprop_iters,
                       std::vector<Vec3>* grad_p, std::vector<Vec3>* grad_u, DensityPenalty penalty)
{
    const FluidParams& params = ctx.params;
    const std::size_t n = state.size();
    const Real h = params.kernel.radius;
    const Real dt = params.dt;
    const Poly6 w(h);
    const bool want_grad = grad_p || grad_u;
    if (n == 0) {
        if (grad_p) grad_p->clear();
        if (grad_u) grad_u->clear();
        return 0.0;
    }

    // Forward, keeping what the reverse sweep needs.
    NeighborLists prev_lists;
    std::vector<Real> rho_prev;
    if (params.drag_k > 0.0) {
        prev_lists = build_neighbor_lists(state.positions, h);
        rho_prev = particle_densities(state.positions, prev_lists, h);
    }
    const Vec3 body = params.buoyancy_alpha * params.gravity;
    std::vector<Vec3> p_hat(n);
    parallel_for(n, [&](std::size_t i) {
        const Vec3& u = state.velocities[i];
        Vec3 f = ctx.force.at(state.positions[i]);
        if (!rho_prev.empty()) {
            f -= params.drag_k * std::max(0.0, 1.0 - rho_prev[i] / params.rest_density) * (u - params.env_velocity);
        }
        const Vec3 u_hat = u + dt * body + dt * f;
        p_hat[i] = state.positions[i] + dt * u_hat;
    });

    const NeighborLists lists = build_neighbor_lists(p_hat, h);
    const int depth = std::clamp(backprop_iters, 0, params.solver_iters);
    std::vector<std::vector<Vec3>> iterates;
    if (want_grad) {
        iterates.reserve(static_cast<std::size_t>(depth));
    }
    std::vector<Vec3> y = p_hat;
    for (int it = 0; it < params.solver_iters; ++it) {
        if (want_grad && it < depth) {
            iterates.push_back(y);
        }
        projection_iteration(y, lists, params);
    }
    clamp_to_domain(y, params.domain);
    if (const RigidBody* rb = ctx.body()) {
        y = rigid_project(y, *rb, rigid_margin(params));
    }

    const NeighborLists next_lists = build_neighbor_lists(y, h);
    std::vector<Real> coeff;
    const Real value = deviation_loss(y, next_lists, h, params.rest_density, penalty, want_grad ? &coeff : nullptr);
    if (!want_grad) {
        return value;
    }

    std::vector<Vec3> adj(n, Vec3::Zero());
    scatter_density_adjoint(y, next_lists, w, coeff, adj);
    for (int it = depth - 1; it >= 0; --it) {
        adj = projection_iteration_adjoint(iterates[static_cast<std::size_t>(it)], lists, params, adj);
    }

    // Velocity prediction: p_hat = p + dt (u + dt (alpha g + f_ext(p) + f_drag(u, rho(p)))).
    std::vector<Vec3> gp(adj.begin(), adj.end());
    std::vector<Vec3> gu(n);
    std::vector<Real> rho_bar(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        const Vec3 uh_bar = dt * adj[i];
        Vec3 ub = uh_bar;
        gp[i] += dt * ctx.force.jacobian(state.positions[i]).transpose() * uh_bar;
        if (!rho_prev.empty()) {
            const Real sparse = 1.0 - rho_prev[i] / params.rest_density;
            if (sparse > 0.0) {
                ub -= dt * params.drag_k * sparse * uh_bar;
                const Real m_bar = -dt * params.drag_k * (state.velocities[i] - params.env_velocity).dot(uh_bar);
                rho_bar[i] = -m_bar / params.rest_density;
            }
        }
        gu[i] = ub;
    });
    if (!rho_prev.empty()) {
        scatter_density_adjoint(state.positions, prev_lists, w, rho_bar, gp);
    }
    if (grad_p) *grad_p = std::move(gp);
    if (grad_u) *grad_u = std::move(gu);
    return value;
}

}  // namespace fluidrec
