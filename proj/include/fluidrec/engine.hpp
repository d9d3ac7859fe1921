// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/camera.hpp"
#include "fluidrec/image.hpp"
#include "fluidrec/losses.hpp"
#include "fluidrec/optimizer.hpp"
#include "fluidrec/pbf.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace fluidrec {

/// Per-camera frames[c][k] observe timestep k + 1 (the state after k + 1
/// simulation steps from the stabilized t = 0 state).
struct SceneObservation {
    std::vector<Camera> cameras;
    std::vector<std::vector<Image>> frames;
    std::vector<Image> backgrounds;

    int frame_count() const { return frames.empty() ? 0 : static_cast<int>(frames.front().size()); }

    /// Throws Error(ObservationMismatch) on inconsistent counts or shapes.
    void validate() const;
};

/// States for timesteps 0..size()-1. Timestep k was emitted at global source
/// step step_offset + k.
struct FluidTrajectory {
    std::int64_t step_offset = 0;
    std::vector<PhysicalParticleSet> physical;
    std::vector<VisualParticleSet> visual;

    std::size_t size() const { return physical.size(); }
    FluidState state(std::size_t k) const { return {physical[k], visual[k]}; }
    void push(const FluidState& s)
    {
        physical.push_back(s.physical);
        visual.push_back(s.visual);
    }
};

/// The loss history of one optimization stage.
struct StageLog {
    int timestep = 0;
    int stage = 0;  // 1 dynamics, 2 appearance
    OptimizeResult result;
    LossReport report;  // at the accepted solution
};

struct ReconstructionLog {
    std::vector<StageLog> stages;
};

/// frames[c][k] -> refined frames of identical shape.
using FrameSet = std::vector<std::vector<Image>>;
using Refiner = std::function<FrameSet(const FrameSet&)>;

Refiner identity_refiner();
/// Gaussian smoothing along time per pixel, clamped at sequence ends.
Refiner temporal_blur_refiner(Real sigma_frames = 1.0);

/// Forward rollout of `steps` timesteps from `start`.
FluidTrajectory rollout(const FluidState& start, std::int64_t step_offset, const SimContext& ctx,
                        const SourceSpec& source, int steps);

/// Renders each timestep 1..size()-1 of `traj` from every camera.
FrameSet render_frames(const FluidTrajectory& traj, const std::vector<Camera>& cameras,
                       const std::vector<Image>& backgrounds);

/// Sequential two-stage reconstruction against obs for t = 1..T, starting
/// from stabilize(source, params, n_stable).
FluidTrajectory reconstruct(const SceneObservation& obs, const FluidParams& params, const LossWeights& weights,
                            const OptimizerConfig& opt, const SourceSpec& source, int n_stable,
                            ReconstructionLog* log = nullptr);

/// The same loop from a given state, with forces and coupling in ctx.
/// frames[c][k] observe timestep k + 1 after `start`.
FluidTrajectory reconstruct_from(const FluidState& start, std::int64_t step_offset, const std::vector<Camera>& cameras,
                                 const std::vector<Image>& backgrounds, const FrameSet& frames,
                                 const SimContext& ctx, const LossWeights& weights, const OptimizerConfig& opt,
                                 const SourceSpec& source, ReconstructionLog* log = nullptr);

/// Replays the stored physical fields: x_t = Adv(V_t, x_{t-1}) from x_0,
/// with newborn visual particles and all appearance attributes copied from
/// traj.
FluidTrajectory resimulate(const FluidTrajectory& traj, const FluidParams& params);

struct PredictionOptions {
    int t_target = 0;  // absolute timestep; must exceed traj.size() - 1
    ExternalForceField force{};
    std::optional<RigidBody> coupling{};
};

/// Rough rollout from the last state, rendering with the initial constant
/// appearance, refinement, and reconstruction against the refined frames.
/// Returns timesteps T..t_target (step_offset adjusted accordingly).
FluidTrajectory predict(const FluidTrajectory& traj, const FluidParams& params, const LossWeights& weights,
                        const OptimizerConfig& opt, const std::vector<Camera>& cameras,
                        const std::vector<Image>& backgrounds, const Refiner& refiner, const SourceSpec& source,
                        const PredictionOptions& options, ReconstructionLog* log = nullptr);

}  // namespace fluidrec
