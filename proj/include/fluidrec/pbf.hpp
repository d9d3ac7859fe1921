// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/interaction.hpp"
#include "fluidrec/kernel.hpp"
#include "fluidrec/particles.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace fluidrec {

struct FluidParams {
    Real dt = 1.0 / 30.0;
    Vec3 gravity = Vec3(0.0, -9.8, 0.0);
    Real buoyancy_alpha = -3.0;  // alpha < 0 makes the fluid rise
    Real drag_k = 3.0;
    Real rest_density = 2.0;
    Vec3 env_velocity = Vec3::Zero();
    int solver_iters = 10;
    Real constraint_epsilon = 1e-5;  // constraint-force mixing in the lambda denominator
    KernelSpec kernel{};
    Aabb domain{Vec3(-16.0, 0.0, -16.0), Vec3(16.0, 48.0, 16.0)};
    std::size_t max_particles = 200000;

    void validate() const;
};

/// Kernel radius over rest spacing used by the default parameter derivation.
inline constexpr Real kDefaultSupportRatio = 2.0;

/// Spacing of a cubic lattice whose interior Poly6 density equals
/// `rest_density` when the kernel radius is `support_ratio` times the spacing.
Real rest_spacing(Real rest_density, Real support_ratio = kDefaultSupportRatio);

/// support_ratio * rest_spacing(rest_density).
Real default_kernel_radius(Real rest_density, Real support_ratio = kDefaultSupportRatio);

struct ExternalForceField {
    enum class Kind { None, Uniform, ExponentialWind };

    Kind kind = Kind::None;
    Vec3 uniform = Vec3::Zero();
    WindSpec wind{};

    Vec3 at(const Vec3& p) const;
    Mat3 jacobian(const Vec3& p) const;

    static ExternalForceField none() { return {}; }
    static ExternalForceField make_uniform(const Vec3& f) { return {Kind::Uniform, f, {}}; }
    static ExternalForceField make_wind(const WindSpec& w) { return {Kind::ExponentialWind, Vec3::Zero(), w}; }
};

struct SourceSpec {
    enum class Shape { Box, Sphere };

    Shape shape = Shape::Box;
    Aabb box{Vec3(-4.0, 0.5, -4.0), Vec3(4.0, 2.5, 4.0)};
    Vec3 center = Vec3(0.0, 1.5, 0.0);
    Real radius = 1.0;
    std::size_t seeds_per_step = 80;
    std::size_t visual_seeds_per_step = 100;
    Real seed_jitter = 1.0;  // fraction of a stratum cell, in [0, 1]
    Vec3 initial_velocity = Vec3(0.0, 2.0, 0.0);
    VisualDefaults visual{};
    std::uint64_t rng_seed = 0;
    bool emit_during_rollout = true;

    Aabb bounds() const;
    bool contains(const Vec3& p) const;
    void validate(const Aabb& domain) const;
};

/// Deterministic stratified samples in the source region. `stream`
/// separates physical (0) and visual (1) draws.
std::vector<Vec3> seed_positions(const SourceSpec& source, std::size_t count, std::int64_t step,
                                 std::uint64_t stream);

/// Newborn particles for one emission event.
struct Emission {
    PhysicalParticleSet physical;
    VisualParticleSet visual;
};

/// Particles seeded at global step `step`, limited so neither set exceeds
/// `max_particles` after appending.
Emission emit(const SourceSpec& source, std::int64_t step, std::size_t physical_count,
              std::size_t visual_count, std::size_t max_particles);

struct SimDiagnostics {
    bool domain_escape = false;
    std::size_t clamped = 0;
};

/// Compressed per-particle neighbor lists (self excluded, |r| < h), in
/// deterministic grid-stencil order.
struct NeighborLists {
    std::vector<std::uint32_t> offsets;  // size n + 1
    std::vector<std::uint32_t> indices;

    std::size_t size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::span<const std::uint32_t> of(std::size_t i) const
    {
        return {indices.data() + offsets[i], offsets[i + 1] - offsets[i]};
    }
};

NeighborLists build_neighbor_lists(std::span<const Vec3> positions, Real h);

/// Particles permuted into grid-cell order: slot k holds particle order[k]
/// and `lists` indexes slots. Each particle sees the same neighbors in the
/// same sequence as build_neighbor_lists, so per-particle sums agree bit
/// for bit while memory access stays local.
struct CellOrdering {
    std::vector<std::uint32_t> order;
    NeighborLists lists;

    std::vector<Vec3> gather(std::span<const Vec3> values) const;
    /// out[order[k]] = slots[k].
    void scatter(std::span<const Vec3> slots, std::span<Vec3> out) const;
};

CellOrdering build_cell_ordering(std::span<const Vec3> positions, Real h);

/// rho_i = sum_j W_poly6(p_i - p_j), self included.
std::vector<Real> particle_densities(std::span<const Vec3> positions, const NeighborLists& lists,
                                     Real h);

/// Same values computed straight from the grid, without storing lists.
std::vector<Real> particle_densities(std::span<const Vec3> positions, Real h);

/// Direction used for the spiky gradient when two particles coincide;
/// antisymmetric in (i, j).
Vec3 coincident_direction(std::uint32_t i, std::uint32_t j);

/// Spiky gradient for the ordered pair (i, j), r = p_i - p_j, with the
/// coincident tie-break.
Vec3 pair_spiky_gradient(const Spiky& spiky, const Vec3& r, std::uint32_t i, std::uint32_t j);

/// Velocity guess u + dt alpha g + dt (f_ext + f_drag).
std::vector<Vec3> predict_velocities(const PhysicalParticleSet& particles, const FluidParams& params,
                                     const ExternalForceField& force);

/// solver_iters Jacobi iterations of the density constraint, unilateral
/// (only over-dense particles are corrected).
std::vector<Vec3> project_constraints(std::span<const Vec3> predicted, const FluidParams& params);

/// One projection iteration in place; neighbor lists stay fixed. `ids`
/// maps list positions to particle indices for the coincident tie-break
/// (empty means identity).
void projection_iteration(std::span<Vec3> positions, const NeighborLists& lists, const FluidParams& params,
                          std::span<const std::uint32_t> ids = {});

/// Clamps to the domain box; returns the number of particles moved.
std::size_t clamp_to_domain(std::span<Vec3> positions, const Aabb& domain);

/// Margin used when snapping particles out of a rigid body.
inline Real rigid_margin(const FluidParams& params) { return 1e-3 * params.kernel.radius; }

/// The simulation operator: predict, project, clamp, optional one-way rigid
/// projection, and velocities from the position change.
PhysicalParticleSet sim_step(const PhysicalParticleSet& particles, const FluidParams& params,
                             const ExternalForceField& force, const RigidBody* coupling,
                             SimDiagnostics* diag = nullptr);

/// Physical and visual particles after seeding and n_stable settling steps.
std::pair<PhysicalParticleSet, VisualParticleSet> stabilize(const SourceSpec& source,
                                                            const FluidParams& params, int n_stable);

/// Everything a forward step needs besides the state.
struct SimContext {
    FluidParams params{};
    ExternalForceField force{};
    std::optional<RigidBody> coupling{};

    const RigidBody* body() const { return coupling ? &*coupling : nullptr; }
};

struct FluidState {
    PhysicalParticleSet physical;
    VisualParticleSet visual;
};

/// Pure forward step at global emission index `step`: simulate, append
/// physical newborns (when the source emits during rollouts), advect the
/// existing visual particles with the field of the full new physical set,
/// then append visual newborns.
FluidState advance_state(const FluidState& prev, const SimContext& ctx, const SourceSpec& source,
                         std::int64_t step, SimDiagnostics* diag = nullptr);

// ---------------------------------------------------------------------------
// Differentiable next-step density term.

/// Which density deviations a density loss penalizes. OverDense matches the
/// unilateral solver constraint; TwoSided also penalizes sparse particles.
enum class DensityPenalty { OverDense, TwoSided };

/// sum_j c_j^2 over the positions p' = Sim(u, p), with c_j = rho(p'_j) / rho0 - 1
/// (clipped at zero from below for OverDense).
/// On request, returns gradients with respect to the state positions and
/// velocities (treated as independent inputs). Back-propagation runs through
/// velocity prediction and the first `backprop_iters` projection
/// iterations; later iterations, domain clamping, and rigid projection are
/// treated as constant offsets.
Real next_density_loss(const PhysicalParticleSet& state, const SimContext& ctx, int backprop_iters,
                       std::vector<Vec3>* grad_p, std::vector<Vec3>* grad_u,
                       DensityPenalty penalty = DensityPenalty::OverDense);

/// sum_j c_j^2 at the given positions and its gradient.
Real density_deviation_loss(std::span<const Vec3> positions, const FluidParams& params,
                            std::vector<Vec3>* grad, DensityPenalty penalty = DensityPenalty::OverDense);

}  // namespace fluidrec
