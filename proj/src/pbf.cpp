// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/pbf.hpp"

#include "fluidrec/error.hpp"
#include "fluidrec/fields.hpp"
#include "fluidrec/neighbor_grid.hpp"
#include "fluidrec/parallel.hpp"

#include <limits>
#include <numeric>
#include <random>

namespace fluidrec {

namespace {

constexpr std::size_t kListChunks = 64;

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

Real unit_from_bits(std::uint64_t bits)
{
    return static_cast<Real>(bits >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace

void FluidParams::validate() const
{
    if (!(dt > 0.0) || !(rest_density > 0.0) || solver_iters < 1 || !(kernel.radius > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "fluid params need dt > 0, rest_density > 0, solver_iters >= 1, h > 0");
    }
    if (!(drag_k >= 0.0) || !(constraint_epsilon >= 0.0) || !domain.valid()) {
        throw Error(ErrorCode::InvalidArgument, "fluid params need drag_k >= 0 and a valid domain");
    }
}

Real rest_spacing(Real rest_density, Real support_ratio)
{
    if (!(rest_density > 0.0) || !(support_ratio > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "rest spacing needs positive density and support ratio");
    }
    // Lattice sum of the unit-radius Poly6 profile at spacing 1/support_ratio.
    const int reach = static_cast<int>(std::ceil(support_ratio));
    const Poly6 unit(1.0);
    Real sum = 0.0;
    for (int i = -reach; i <= reach; ++i) {
        for (int j = -reach; j <= reach; ++j) {
            for (int k = -reach; k <= reach; ++k) {
                const Real r2 = static_cast<Real>(i * i + j * j + k * k) / (support_ratio * support_ratio);
                sum += unit.value_r2(r2);
            }
        }
    }
    // rho = sum / (ratio s)^3
    return std::cbrt(sum / (rest_density * support_ratio * support_ratio * support_ratio));
}

Real default_kernel_radius(Real rest_density, Real support_ratio)
{
    return support_ratio * rest_spacing(rest_density, support_ratio);
}

Vec3 ExternalForceField::at(const Vec3& p) const
{
    switch (kind) {
    case Kind::None: return Vec3::Zero();
    case Kind::Uniform: return uniform;
    case Kind::ExponentialWind: return wind_force(wind, p);
    }
    return Vec3::Zero();
}

Mat3 ExternalForceField::jacobian(const Vec3& p) const
{
    if (kind == Kind::ExponentialWind) {
        return wind_force_jacobian(wind, p);
    }
    return Mat3::Zero();
}

Aabb SourceSpec::bounds() const
{
    if (shape == Shape::Box) {
        return box;
    }
    return {center - Vec3::Constant(radius), center + Vec3::Constant(radius)};
}

bool SourceSpec::contains(const Vec3& p) const
{
    if (shape == Shape::Box) {
        return box.contains(p);
    }
    return (p - center).norm() <= radius;
}

void SourceSpec::validate(const Aabb& domain) const
{
    if (shape == Shape::Box && !box.valid()) {
        throw Error(ErrorCode::InvalidArgument, "source box is degenerate");
    }
    if (shape == Shape::Sphere && !(radius > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "source sphere radius must be positive");
    }
    if (!domain.contains(bounds())) {
        throw Error(ErrorCode::InvalidArgument, "source region must lie inside the domain");
    }
    if (!(seed_jitter >= 0.0 && seed_jitter <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "seed_jitter must be in [0, 1]");
    }
}

std::vector<Vec3> seed_positions(const SourceSpec& source, std::size_t count, std::int64_t step,
                                 std::uint64_t stream)
{
    std::vector<Vec3> out;
    if (count == 0) {
        return out;
    }
    std::mt19937_64 rng(splitmix64(source.rng_seed ^ splitmix64(static_cast<std::uint64_t>(step) * 2 + stream)));
    auto uniform = [&rng]() { return unit_from_bits(rng()); };

    const Aabb b = source.bounds();
    const Vec3 ext = b.extent();
    // Strata proportional to the region extents, with at least `count` cells.
    const Real vol = ext.prod();
    const Real cell = std::cbrt(vol / static_cast<Real>(count));
    int dims[3];
    for (int a = 0; a < 3; ++a) {
        dims[a] = std::max(1, static_cast<int>(std::ceil(ext[a] / cell)));
    }
    while (static_cast<std::size_t>(dims[0]) * dims[1] * dims[2] < count) {
        ++dims[1];
    }
    const std::size_t total = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    std::vector<std::uint32_t> order(total);
    std::iota(order.begin(), order.end(), 0u);
    for (std::size_t k = total; k > 1; --k) {
        const std::size_t r = static_cast<std::size_t>(uniform() * static_cast<Real>(k));
        std::swap(order[k - 1], order[std::min(r, k - 1)]);
    }
    const Vec3 step_size(ext.x() / dims[0], ext.y() / dims[1], ext.z() / dims[2]);

    out.reserve(count);
    std::size_t k = 0;
    std::size_t attempts = 0;
    while (out.size() < count) {
        const std::uint32_t cid = order[k % total];
        ++k;
        const int ix = static_cast<int>(cid % dims[0]);
        const int iy = static_cast<int>((cid / dims[0]) % dims[1]);
        const int iz = static_cast<int>(cid / (static_cast<std::uint32_t>(dims[0]) * dims[1]));
        const Vec3 jitter(uniform() - 0.5, uniform() - 0.5, uniform() - 0.5);
        const Vec3 local = Vec3(ix + 0.5, iy + 0.5, iz + 0.5) + source.seed_jitter * jitter;
        const Vec3 p = b.lo + local.cwiseProduct(step_size);
        if (source.contains(p) || ++attempts > 64 * count) {
            out.push_back(source.contains(p) ? p : source.bounds().center());
        }
    }
    return out;
}

Emission emit(const SourceSpec& source, std::int64_t step, std::size_t physical_count,
              std::size_t visual_count, std::size_t max_particles)
{
    const auto room = [&](std::size_t have, std::size_t want) {
        return have >= max_particles ? std::size_t{0} : std::min(want, max_particles - have);
    };
    Emission e;
    e.physical.positions = seed_positions(source, room(physical_count, source.seeds_per_step), step, 0);
    e.physical.velocities.assign(e.physical.positions.size(), source.initial_velocity);
    const std::size_t nv = room(visual_count, source.visual_seeds_per_step);
    e.visual.positions = seed_positions(source, nv, step, 1);
    e.visual.colors.assign(nv, source.visual.color);
    e.visual.scales.assign(nv, source.visual.scale);
    e.visual.opacities.assign(nv, source.visual.opacity);
    e.visual.rotations.assign(nv, source.visual.rotation);
    return e;
}

CellOrdering build_cell_ordering(std::span<const Vec3> positions, Real h)
{
    const std::size_t n = positions.size();
    CellOrdering c;
    c.lists.offsets.assign(n + 1, 0);
    if (n == 0) {
        return c;
    }
    // Half-size cells with a reach of two visit fewer candidates than the
    // 27-cell stencil of kernel-radius cells.
    const HashGrid grid = HashGrid::build(positions, 0.5 * h);
    const std::span<const std::uint32_t> order = grid.order();
    c.order.assign(order.begin(), order.end());
    const std::vector<Vec3> y = c.gather(positions);
    const Real h2 = h * h;
    std::vector<std::vector<std::uint32_t>> chunk_indices(kListChunks);
    parallel_chunks(n, kListChunks, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        auto& out = chunk_indices[chunk];
        std::vector<std::uint32_t> scratch;
        for (std::size_t k = begin; k < end; ++k) {
            const Vec3 pk = y[k];
            std::size_t found = 0;
            grid.for_each_run(
                pk,
                [&](std::uint32_t rb, std::uint32_t re) {
                    if (scratch.size() < found + (re - rb)) {
                        scratch.resize(2 * (found + (re - rb)));
                    }
                    std::uint32_t* dst = scratch.data() + found;
                    std::size_t hits = 0;
                    for (std::uint32_t m = rb; m < re; ++m) {
                        dst[hits] = m;
                        hits += static_cast<std::size_t>((pk - y[m]).squaredNorm() < h2) & static_cast<std::size_t>(m != k);
                    }
                    found += hits;
                },
                2);
            out.insert(out.end(), scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(found));
            c.lists.offsets[k + 1] = static_cast<std::uint32_t>(found);
        }
    });
    std::partial_sum(c.lists.offsets.begin(), c.lists.offsets.end(), c.lists.offsets.begin());
    c.lists.indices.reserve(c.lists.offsets.back());
    for (const auto& chunk : chunk_indices) {
        c.lists.indices.insert(c.lists.indices.end(), chunk.begin(), chunk.end());
    }
    return c;
}

std::vector<Vec3> CellOrdering::gather(std::span<const Vec3> values) const
{
    std::vector<Vec3> out(order.size());
    parallel_for(order.size(), [&](std::size_t k) { out[k] = values[order[k]]; });
    return out;
}

void CellOrdering::scatter(std::span<const Vec3> slots, std::span<Vec3> out) const
{
    parallel_for(order.size(), [&](std::size_t k) { out[order[k]] = slots[k]; });
}

NeighborLists build_neighbor_lists(std::span<const Vec3> positions, Real h)
{
    const std::size_t n = positions.size();
    const CellOrdering c = build_cell_ordering(positions, h);
    NeighborLists lists;
    lists.offsets.assign(n + 1, 0);
    for (std::size_t k = 0; k < n; ++k) {
        lists.offsets[c.order[k] + 1] = static_cast<std::uint32_t>(c.lists.of(k).size());
    }
    std::partial_sum(lists.offsets.begin(), lists.offsets.end(), lists.offsets.begin());
    lists.indices.resize(lists.offsets.back());
    parallel_for(n, [&](std::size_t k) {
        std::uint32_t* dst = lists.indices.data() + lists.offsets[c.order[k]];
        for (std::uint32_t m : c.lists.of(k)) {
            *dst++ = c.order[m];
        }
    });
    return lists;
}

std::vector<Real> particle_densities(std::span<const Vec3> positions, Real h)
{
    const std::size_t n = positions.size();
    std::vector<Real> rho(n);
    if (n == 0) {
        return rho;
    }
    // Same grid and candidate sequence as build_cell_ordering, so the sums
    // match particle_densities over build_neighbor_lists bit for bit.
    const Poly6 w(h);
    const HashGrid grid = HashGrid::build(positions, 0.5 * h);
    const std::span<const std::uint32_t> order = grid.order();
    std::vector<Vec3> y(n);
    parallel_for(n, [&](std::size_t k) { y[k] = positions[order[k]]; });
    parallel_for(n, [&](std::size_t k) {
        const Vec3 pk = y[k];
        Real sum = w.at_zero();
        grid.for_each_run(
            pk,
            [&](std::uint32_t rb, std::uint32_t re) {
                for (std::uint32_t m = rb; m < re; ++m) {
                    if (m != k) {
                        sum += w.value_r2((pk - y[m]).squaredNorm());
                    }
                }
            },
            2);
        rho[order[k]] = sum;
    });
    return rho;
}

std::vector<Real> particle_densities(std::span<const Vec3> positions, const NeighborLists& lists, Real h)
{
    const Poly6 w(h);
    std::vector<Real> rho(positions.size());
    parallel_for(positions.size(), [&](std::size_t i) {
        Real sum = w.at_zero();
        for (std::uint32_t j : lists.of(i)) {
            sum += w.value_r2((positions[i] - positions[j]).squaredNorm());
        }
        rho[i] = sum;
    });
    return rho;
}

Vec3 coincident_direction(std::uint32_t i, std::uint32_t j)
{
    const std::uint32_t a = std::min(i, j), b = std::max(i, j);
    const std::uint64_t key = splitmix64((static_cast<std::uint64_t>(a) << 32) | b);
    const Real z = 2.0 * unit_from_bits(key) - 1.0;
    const Real phi = 2.0 * std::numbers::pi * unit_from_bits(splitmix64(key));
    const Real rr = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 d(rr * std::cos(phi), rr * std::sin(phi), z);
    return i < j ? d : Vec3(-d);
}

Vec3 pair_spiky_gradient(const Spiky& spiky, const Vec3& r, std::uint32_t i, std::uint32_t j)
{
    const Real q = r.norm();
    if (q < 1e-9 * spiky.h()) {
        return spiky.radial_derivative(q) * coincident_direction(i, j);
    }
    return spiky.gradient(r, q);
}

std::vector<Vec3> predict_velocities(const PhysicalParticleSet& particles, const FluidParams& params,
                                     const ExternalForceField& force)
{
    const std::size_t n = particles.size();
    const Vec3 body = params.buoyancy_alpha * params.gravity;
    std::vector<Real> rho;
    if (params.drag_k > 0.0 && n > 0) {
        rho = particle_densities(particles.positions, params.kernel.radius);
    }
    std::vector<Vec3> out(n);
    parallel_for(n, [&](std::size_t i) {
        const Vec3& u = particles.velocities[i];
        Vec3 f = force.at(particles.positions[i]);
        if (!rho.empty()) {
            const Real sparse = std::max(0.0, 1.0 - rho[i] / params.rest_density);
            f -= params.drag_k * sparse * (u - params.env_velocity);
        }
        out[i] = u + params.dt * body + params.dt * f;
    });
    return out;
}

void projection_iteration(std::span<Vec3> y, const NeighborLists& lists, const FluidParams& params,
                          std::span<const std::uint32_t> ids)
{
    const std::size_t n = y.size();
    const Real h = params.kernel.radius;
    const Real tiny = 1e-9 * h;
    const Poly6 w(h);
    const Spiky spiky(h);
    const Real inv_rho0 = 1.0 / params.rest_density;
    const auto id = [&](std::size_t k) {
        return ids.empty() ? static_cast<std::uint32_t>(k) : ids[k];
    };
    // Gradient factors of active particles' pairs, reused by the correction
    // pass. NaN marks a coincident pair.
    thread_local std::vector<Real> factor_storage;
    factor_storage.resize(lists.indices.size());
    Real* const factor = factor_storage.data();
    std::vector<Real> lambda(n);
    parallel_for(n, [&](std::size_t i) {
        const Vec3 pi = y[i];
        Real rho = w.at_zero();
        for (std::uint32_t j : lists.of(i)) {
            rho += w.value_r2((pi - y[j]).squaredNorm());
        }
        const Real c = rho * inv_rho0 - 1.0;
        if (c <= 0.0) {
            lambda[i] = 0.0;
            return;
        }
        Vec3 a = Vec3::Zero();
        Real sum_sq = 0.0;
        for (std::uint32_t e = lists.offsets[i]; e < lists.offsets[i + 1]; ++e) {
            const std::uint32_t j = lists.indices[e];
            const Vec3 r = pi - y[j];
            const Real q = r.norm();
            Vec3 g;
            if (q < tiny) {
                factor[e] = std::numeric_limits<Real>::quiet_NaN();
                g = spiky.radial_derivative(q) * coincident_direction(id(i), id(j));
            } else {
                factor[e] = spiky.gradient_factor(q);
                g = factor[e] * r;
            }
            a += g;
            sum_sq += g.squaredNorm();
        }
        const Real s = (a.squaredNorm() + sum_sq) * inv_rho0 * inv_rho0;
        lambda[i] = -c / (s + params.constraint_epsilon);
    });
    std::vector<Vec3> delta(n);
    parallel_for(n, [&](std::size_t i) {
        const Vec3 pi = y[i];
        const bool cached = lambda[i] != 0.0;
        Vec3 d = Vec3::Zero();
        for (std::uint32_t e = lists.offsets[i]; e < lists.offsets[i + 1]; ++e) {
            const std::uint32_t j = lists.indices[e];
            const Real lij = lambda[i] + lambda[j];
            if (lij == 0.0) {
                continue;
            }
            const Vec3 r = pi - y[j];
            if (cached && !std::isnan(factor[e])) {
                d += lij * (factor[e] * r);
            } else {
                d += lij * pair_spiky_gradient(spiky, r, id(i), id(j));
            }
        }
        delta[i] = d * inv_rho0;
    });
    parallel_for(n, [&](std::size_t i) { y[i] += delta[i]; });
}

std::vector<Vec3> project_constraints(std::span<const Vec3> predicted, const FluidParams& params)
{
    std::vector<Vec3> out(predicted.begin(), predicted.end());
    if (out.empty()) {
        return out;
    }
    const CellOrdering c = build_cell_ordering(predicted, params.kernel.radius);
    std::vector<Vec3> y = c.gather(predicted);
    for (int it = 0; it < params.solver_iters; ++it) {
        projection_iteration(y, c.lists, params, c.order);
    }
    c.scatter(y, out);
    return out;
}

std::size_t clamp_to_domain(std::span<Vec3> positions, const Aabb& domain)
{
    std::size_t moved = 0;
    for (Vec3& p : positions) {
        const Vec3 c = p.cwiseMax(domain.lo).cwiseMin(domain.hi);
        if (c != p) {
            p = c;
            ++moved;
        }
    }
    return moved;
}

PhysicalParticleSet sim_step(const PhysicalParticleSet& particles, const FluidParams& params,
                             const ExternalForceField& force, const RigidBody* coupling, SimDiagnostics* diag)
{
    const std::size_t n = particles.size();
    const std::vector<Vec3> u_hat = predict_velocities(particles, params, force);
    std::vector<Vec3> p_hat(n);
    parallel_for(n, [&](std::size_t i) { p_hat[i] = particles.positions[i] + params.dt * u_hat[i]; });

    PhysicalParticleSet out;
    out.positions = project_constraints(p_hat, params);
    const std::size_t clamped = clamp_to_domain(out.positions, params.domain);
    if (coupling) {
        out.positions = rigid_project(out.positions, *coupling, rigid_margin(params));
    }
    out.velocities.resize(n);
    const Real inv_dt = 1.0 / params.dt;
    parallel_for(n, [&](std::size_t i) {
        out.velocities[i] = (out.positions[i] - particles.positions[i]) * inv_dt;
    });
    if (diag) {
        diag->clamped = clamped;
        diag->domain_escape = clamped > 0;
    }
    return out;
}

FluidState advance_state(const FluidState& prev, const SimContext& ctx, const SourceSpec& source,
                         std::int64_t step, SimDiagnostics* diag)
{
    FluidState next;
    next.physical = sim_step(prev.physical, ctx.params, ctx.force, ctx.body(), diag);
    Emission e;
    if (source.emit_during_rollout) {
        e = emit(source, step, next.physical.size(), prev.visual.size(), ctx.params.max_particles);
        next.physical.append(e.physical);
    }
    const VelocityFieldView field(next.physical, ctx.params.kernel);
    next.visual = prev.visual;
    next.visual.positions = advect_all(field, prev.visual.positions, ctx.params.dt);
    next.visual.append(e.visual);
    return next;
}

std::pair<PhysicalParticleSet, VisualParticleSet> stabilize(const SourceSpec& source, const FluidParams& params,
                                                            int n_stable)
{
    if (n_stable < 0) {
        throw Error(ErrorCode::InvalidArgument, "n_stable must be >= 0");
    }
    params.validate();
    source.validate(params.domain);
    Emission first = emit(source, 0, 0, 0, params.max_particles);
    FluidState state{std::move(first.physical), std::move(first.visual)};
    SimContext ctx;
    ctx.params = params;
    SourceSpec settling = source;
    settling.emit_during_rollout = true;  // stabilization always seeds each step
    for (int k = 1; k <= n_stable; ++k) {
        state = advance_state(state, ctx, settling, k);
    }
    return {std::move(state.physical), std::move(state.visual)};
}

}  // namespace fluidrec
