// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/engine.hpp"

#include "fluidrec/error.hpp"
#include "fluidrec/fields.hpp"
#include "fluidrec/parallel.hpp"
#include "fluidrec/render.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace fluidrec {

namespace {

void require_finite(Real v, int timestep, const char* term)
{
    if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteLoss, "timestep " + std::to_string(timestep) + ", term " + term);
    }
}

void check_report(const LossReport& r, int timestep)
{
    require_finite(r.sim, timestep, "sim");
    require_finite(r.incomp_now, timestep, "incomp_now");
    require_finite(r.incomp_next, timestep, "incomp_next");
    require_finite(r.incomp_visual, timestep, "incomp_visual");
    require_finite(r.visual_l1, timestep, "visual_l1");
    require_finite(r.visual_ssim, timestep, "visual_ssim");
    require_finite(r.reg, timestep, "reg");
    require_finite(r.aniso, timestep, "aniso");
    require_finite(r.total, timestep, "total");
}

struct ViewSet {
    const std::vector<Camera>* cameras;
    const std::vector<Image>* backgrounds;
    std::vector<Image> references;
};

/// Renders every view; fills the visual terms and, on request, the
/// gradients of visual_weight * (l1 + ssim) with respect to `vis`.
void visual_terms(const VisualParticleSet& vis, const ViewSet& views, const LossWeights& w, LossReport& rep,
                  RenderGradients* grads)
{
    const std::size_t nv = views.cameras->size();
    std::vector<std::unique_ptr<SplatRenderer>> renderers(nv);
    std::vector<Image> rendered(nv);
    for (std::size_t c = 0; c < nv; ++c) {
        renderers[c] = std::make_unique<SplatRenderer>(vis, (*views.cameras)[c], (*views.backgrounds)[c]);
        rendered[c] = renderers[c]->image();
    }
    std::vector<Image> adj;
    const VisualTerms vt = loss_visual(rendered, views.references, grads ? &adj : nullptr);
    rep.visual_l1 = vt.l1;
    rep.visual_ssim = vt.ssim;
    if (!grads) {
        return;
    }
    grads->resize(vis.size());
    for (std::size_t c = 0; c < nv; ++c) {
        for (Real& a : adj[c].data) {
            a *= w.visual_weight;
        }
        grads->add(renderers[c]->backward(adj[c]));
    }
}

void project_appearance(VisualParticleSet& v, Real min_scale)
{
    for (std::size_t i = 0; i < v.size(); ++i) {
        v.colors[i] = v.colors[i].cwiseMax(0.0).cwiseMin(1.0);
        v.scales[i] = v.scales[i].cwiseMax(min_scale);
        v.opacities[i] = std::clamp(v.opacities[i], 0.0, 1.0);
        const Real len = v.rotations[i].norm();
        v.rotations[i] = len > 0.0 ? Quat(v.rotations[i] / len) : Quat(1.0, 0.0, 0.0, 0.0);
    }
}

constexpr int kAttrStride = 11;  // color 3, scale 3, opacity 1, rotation 4

Eigen::VectorXd pack_appearance(const VisualParticleSet& v)
{
    Eigen::VectorXd a(kAttrStride * static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Eigen::Index o = kAttrStride * static_cast<Eigen::Index>(i);
        a.segment<3>(o) = v.colors[i];
        a.segment<3>(o + 3) = v.scales[i];
        a[o + 6] = v.opacities[i];
        a.segment<4>(o + 7) = v.rotations[i];
    }
    return a;
}

void unpack_appearance(const Eigen::VectorXd& a, VisualParticleSet& v)
{
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Eigen::Index o = kAttrStride * static_cast<Eigen::Index>(i);
        v.colors[i] = a.segment<3>(o);
        v.scales[i] = a.segment<3>(o + 3);
        v.opacities[i] = a[o + 6];
        v.rotations[i] = a.segment<4>(o + 7);
    }
}

/// Physical state at t from optimized old positions plus newborns.
PhysicalParticleSet assemble_physical(const Eigen::VectorXd& z, const PhysicalParticleSet& prev,
                                      const PhysicalParticleSet& newborn, Real dt)
{
    const std::size_t n = prev.size();
    PhysicalParticleSet cur;
    cur.positions.resize(n);
    cur.velocities.resize(n);
    const Real inv_dt = 1.0 / dt;
    for (std::size_t i = 0; i < n; ++i) {
        cur.positions[i] = z.segment<3>(3 * static_cast<Eigen::Index>(i));
        cur.velocities[i] = (cur.positions[i] - prev.positions[i]) * inv_dt;
    }
    cur.append(newborn);
    return cur;
}

VisualParticleSet advected_visual(const VelocityFieldView& field, const VisualParticleSet& prev,
                                  const VisualParticleSet& newborn, Real dt)
{
    VisualParticleSet vis = prev;
    vis.positions = advect_all(field, prev.positions, dt);
    vis.append(newborn);
    return vis;
}

}  // namespace

void SceneObservation::validate() const
{
    if (cameras.empty()) {
        throw Error(ErrorCode::ObservationMismatch, "observation needs at least one camera");
    }
    if (frames.size() != cameras.size() || backgrounds.size() != cameras.size()) {
        throw Error(ErrorCode::ObservationMismatch, "frame and background sets must match the camera count");
    }
    const std::size_t t = frames.front().size();
    if (t == 0) {
        throw Error(ErrorCode::ObservationMismatch, "observation needs at least one frame");
    }
    for (std::size_t c = 0; c < cameras.size(); ++c) {
        const Camera& cam = cameras[c];
        cam.validate();
        if (frames[c].size() != t) {
            throw Error(ErrorCode::ObservationMismatch, "camera sequences differ in length");
        }
        const auto fits = [&](const Image& img) {
            return img.width == cam.width && img.height == cam.height && img.channels == 3;
        };
        if (!fits(backgrounds[c])) {
            throw Error(ErrorCode::ObservationMismatch, "background " + std::to_string(c) + " does not match its camera");
        }
        for (const Image& img : frames[c]) {
            if (!fits(img)) {
                throw Error(ErrorCode::ObservationMismatch, "frame of camera " + std::to_string(c) + " does not match its camera");
            }
        }
    }
}

Refiner identity_refiner()
{
    return [](const FrameSet& in) { return in; };
}

Refiner temporal_blur_refiner(Real sigma_frames)
{
    if (!(sigma_frames > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "temporal blur sigma must be positive");
    }
    return [sigma_frames](const FrameSet& in) {
        const int reach = static_cast<int>(std::ceil(3.0 * sigma_frames));
        FrameSet out = in;
        for (std::size_t c = 0; c < in.size(); ++c) {
            const int t = static_cast<int>(in[c].size());
            for (int k = 0; k < t; ++k) {
                Image acc(in[c][k].width, in[c][k].height, in[c][k].channels, 0.0);
                Real wsum = 0.0;
                for (int d = -reach; d <= reach; ++d) {
                    const int j = std::clamp(k + d, 0, t - 1);
                    const Real wgt = std::exp(-0.5 * d * d / (sigma_frames * sigma_frames));
                    wsum += wgt;
                    const Image& src = in[c][j];
                    for (std::size_t s = 0; s < acc.size(); ++s) {
                        acc.data[s] += wgt * src.data[s];
                    }
                }
                for (Real& v : acc.data) {
                    v = std::clamp(v / wsum, 0.0, 1.0);
                }
                out[c][k] = std::move(acc);
            }
        }
        return out;
    };
}

FluidTrajectory rollout(const FluidState& start, std::int64_t step_offset, const SimContext& ctx,
                        const SourceSpec& source, int steps)
{
    FluidTrajectory traj;
    traj.step_offset = step_offset;
    traj.push(start);
    FluidState state = start;
    for (int k = 1; k <= steps; ++k) {
        state = advance_state(state, ctx, source, step_offset + k);
        traj.push(state);
    }
    return traj;
}

FrameSet render_frames(const FluidTrajectory& traj, const std::vector<Camera>& cameras,
                       const std::vector<Image>& backgrounds)
{
    if (backgrounds.size() != cameras.size()) {
        throw Error(ErrorCode::ObservationMismatch, "one background per camera is required");
    }
    FrameSet frames(cameras.size());
    const std::size_t t = traj.size() < 1 ? 0 : traj.size() - 1;
    for (std::size_t c = 0; c < cameras.size(); ++c) {
        frames[c].resize(t);
    }
    parallel_for(t * cameras.size(), [&](std::size_t job) {
        const std::size_t c = job % cameras.size();
        const std::size_t k = job / cameras.size();
        frames[c][k] = render(traj.visual[k + 1], cameras[c], backgrounds[c]);
    });
    return frames;
}

FluidTrajectory reconstruct_from(const FluidState& start, std::int64_t step_offset, const std::vector<Camera>& cameras,
                                 const std::vector<Image>& backgrounds, const FrameSet& frames,
                                 const SimContext& ctx, const LossWeights& weights, const OptimizerConfig& opt,
                                 const SourceSpec& source, ReconstructionLog* log)
{
    weights.validate();
    opt.validate();
    ctx.params.validate();
    if (frames.size() != cameras.size()) {
        throw Error(ErrorCode::ObservationMismatch, "frame sets must match the camera count");
    }
    const FluidParams& params = ctx.params;
    const Real dt = params.dt;
    const int steps = frames.empty() ? 0 : static_cast<int>(frames.front().size());

    FluidTrajectory traj;
    traj.step_offset = step_offset;
    traj.push(start);

    for (int t = 1; t <= steps; ++t) {
        const FluidState prev = traj.state(static_cast<std::size_t>(t - 1));
        const std::size_t n_old = prev.physical.size();
        const std::size_t nx_old = prev.visual.size();

        ViewSet views{&cameras, &backgrounds, {}};
        views.references.reserve(cameras.size());
        for (std::size_t c = 0; c < cameras.size(); ++c) {
            views.references.push_back(frames[c][static_cast<std::size_t>(t - 1)]);
        }

        const PhysicalParticleSet sim = sim_step(prev.physical, params, ctx.force, ctx.body());
        Emission born;
        if (source.emit_during_rollout) {
            born = emit(source, step_offset + t, n_old, nx_old, params.max_particles);
        }

        // Stage 1: old physical positions, appearance frozen.
        Eigen::VectorXd z(3 * static_cast<Eigen::Index>(n_old));
        for (std::size_t i = 0; i < n_old; ++i) {
            z.segment<3>(3 * static_cast<Eigen::Index>(i)) = sim.positions[i];
        }
        LossReport last;
        const Objective dynamics = [&](const Eigen::VectorXd& zz, Eigen::VectorXd* grad) {
            const PhysicalParticleSet cur = assemble_physical(zz, prev.physical, born.physical, dt);
            const VelocityFieldView field(cur, params.kernel);
            const VisualParticleSet vis = advected_visual(field, prev.visual, born.visual, dt);
            const std::span<const Vec3> p_old(cur.positions.data(), n_old);

            LossReport rep;
            std::vector<Vec3> gs, gp, gu, gx;
            rep.sim = loss_sim(p_old, sim.positions, grad ? &gs : nullptr);
            const IncompTerms inc = loss_incomp(cur, vis.positions, ctx, weights, grad ? &gp : nullptr,
                                                grad ? &gu : nullptr, grad ? &gx : nullptr);
            rep.incomp_now = inc.now;
            rep.incomp_next = inc.next;
            rep.incomp_visual = inc.visual;
            RenderGradients rg;
            visual_terms(vis, views, weights, rep, grad ? &rg : nullptr);
            rep.total = weighted_total(rep, weights);
            check_report(rep, t);
            if (grad) {
                std::vector<Vec3> p_bar = gp;
                std::vector<Vec3> u_bar = gu;
                for (std::size_t i = 0; i < nx_old; ++i) {
                    const Vec3 x_bar = gx[i] + rg.positions[i];
                    if (x_bar.squaredNorm() > 0.0) {
                        field.advect_adjoint(prev.visual.positions[i], dt, x_bar, p_bar, u_bar);
                    }
                }
                grad->resize(zz.size());
                const Real inv_dt = 1.0 / dt;
                for (std::size_t i = 0; i < n_old; ++i) {
                    grad->segment<3>(3 * static_cast<Eigen::Index>(i)) =
                        weights.lambda_sim * gs[i] + p_bar[i] + u_bar[i] * inv_dt;
                }
            }
            last = rep;
            return rep.total;
        };
        const Projection keep_feasible = [&](Eigen::VectorXd& zz) {
            std::vector<Vec3> p(n_old);
            for (std::size_t i = 0; i < n_old; ++i) {
                p[i] = zz.segment<3>(3 * static_cast<Eigen::Index>(i));
            }
            clamp_to_domain(p, params.domain);
            if (const RigidBody* rb = ctx.body()) {
                p = rigid_project(p, *rb, rigid_margin(params));
            }
            for (std::size_t i = 0; i < n_old; ++i) {
                zz.segment<3>(3 * static_cast<Eigen::Index>(i)) = p[i];
            }
        };
        StageLog s1{t, 1, {}, {}};
        s1.result = minimize(z, dynamics, keep_feasible, opt.position_step * params.kernel.radius,
                             opt.iterations_dynamics, opt);

        FluidState next;
        next.physical = assemble_physical(z, prev.physical, born.physical, dt);
        {
            const VelocityFieldView field(next.physical, params.kernel);
            next.visual = advected_visual(field, prev.visual, born.visual, dt);
        }
        if (log) {
            dynamics(z, nullptr);
            s1.report = last;
            log->stages.push_back(s1);
        }

        // Stage 2: appearance attributes with positions fixed.
        const VisualParticleSet base = next.visual;
        VisualParticleSet trial = base;
        Eigen::VectorXd a = pack_appearance(base);
        const Objective appearance = [&](const Eigen::VectorXd& aa, Eigen::VectorXd* grad) {
            unpack_appearance(aa, trial);
            LossReport rep;
            const RegTerms reg = loss_reg(trial, base, weights, grad ? &rep : nullptr);
            rep.reg = reg.l2;
            rep.aniso = reg.aniso;
            RenderGradients rg;
            visual_terms(trial, views, weights, rep, grad ? &rg : nullptr);
            rep.total = weighted_total(rep, weights);
            check_report(rep, t);
            if (grad) {
                grad->resize(aa.size());
                for (std::size_t i = 0; i < trial.size(); ++i) {
                    const Eigen::Index o = kAttrStride * static_cast<Eigen::Index>(i);
                    grad->segment<3>(o) = rep.grad_colors[i] + rg.colors[i];
                    grad->segment<3>(o + 3) = rep.grad_scales[i] + rg.scales[i];
                    (*grad)[o + 6] = rep.grad_opacities[i] + rg.opacities[i];
                    grad->segment<4>(o + 7) = rep.grad_rotations[i] + rg.rotations[i];
                }
            }
            last = rep;
            return rep.total;
        };
        const Projection attr_feasible = [&](Eigen::VectorXd& aa) {
            unpack_appearance(aa, trial);
            project_appearance(trial, opt.min_scale);
            aa = pack_appearance(trial);
        };
        StageLog s2{t, 2, {}, {}};
        s2.result = minimize(a, appearance, attr_feasible, opt.appearance_step, opt.iterations_appearance, opt);
        unpack_appearance(a, next.visual);
        if (log) {
            appearance(a, nullptr);
            s2.report = last;
            log->stages.push_back(s2);
        }
        traj.push(next);
    }
    return traj;
}

FluidTrajectory reconstruct(const SceneObservation& obs, const FluidParams& params, const LossWeights& weights,
                            const OptimizerConfig& opt, const SourceSpec& source, int n_stable,
                            ReconstructionLog* log)
{
    obs.validate();
    auto [phys, vis] = stabilize(source, params, n_stable);
    SimContext ctx;
    ctx.params = params;
    return reconstruct_from(FluidState{std::move(phys), std::move(vis)}, n_stable, obs.cameras, obs.backgrounds,
                            obs.frames, ctx, weights, opt, source, log);
}

FluidTrajectory resimulate(const FluidTrajectory& traj, const FluidParams& params)
{
    FluidTrajectory out;
    out.step_offset = traj.step_offset;
    if (traj.size() == 0) {
        return out;
    }
    out.push(traj.state(0));
    for (std::size_t k = 1; k < traj.size(); ++k) {
        const VisualParticleSet& prev = out.visual.back();
        const VisualParticleSet& ref = traj.visual[k];
        if (ref.size() < prev.size()) {
            throw Error(ErrorCode::LengthMismatch, "visual particles may not disappear between timesteps");
        }
        const VelocityFieldView field(traj.physical[k], params.kernel);
        VisualParticleSet next = ref;
        const std::vector<Vec3> moved = advect_all(field, prev.positions, params.dt);
        std::copy(moved.begin(), moved.end(), next.positions.begin());
        out.physical.push_back(traj.physical[k]);
        out.visual.push_back(std::move(next));
    }
    return out;
}

FluidTrajectory predict(const FluidTrajectory& traj, const FluidParams& params, const LossWeights& weights,
                        const OptimizerConfig& opt, const std::vector<Camera>& cameras,
                        const std::vector<Image>& backgrounds, const Refiner& refiner, const SourceSpec& source,
                        const PredictionOptions& options, ReconstructionLog* log)
{
    if (traj.size() == 0) {
        throw Error(ErrorCode::InvalidArgument, "prediction needs a non-empty trajectory");
    }
    const int last = static_cast<int>(traj.size()) - 1;
    if (options.t_target <= last) {
        throw Error(ErrorCode::InvalidArgument, "t_target must exceed the last reconstructed timestep");
    }
    SimContext ctx;
    ctx.params = params;
    ctx.force = options.force;
    ctx.coupling = options.coupling;
    const FluidState start = traj.state(static_cast<std::size_t>(last));
    const std::int64_t offset = traj.step_offset + last;

    FluidTrajectory rough = rollout(start, offset, ctx, source, options.t_target - last);
    for (VisualParticleSet& v : rough.visual) {
        std::fill(v.colors.begin(), v.colors.end(), source.visual.color);
        std::fill(v.scales.begin(), v.scales.end(), source.visual.scale);
        std::fill(v.opacities.begin(), v.opacities.end(), source.visual.opacity);
        std::fill(v.rotations.begin(), v.rotations.end(), source.visual.rotation);
    }
    const FrameSet frames = render_frames(rough, cameras, backgrounds);
    const FrameSet refined = refiner(frames);
    if (refined.size() != frames.size()) {
        throw Error(ErrorCode::ObservationMismatch, "refiner changed the camera count");
    }
    for (std::size_t c = 0; c < frames.size(); ++c) {
        if (refined[c].size() != frames[c].size()) {
            throw Error(ErrorCode::ObservationMismatch, "refiner changed the sequence length");
        }
        for (std::size_t k = 0; k < frames[c].size(); ++k) {
            if (!refined[c][k].same_shape(frames[c][k])) {
                throw Error(ErrorCode::ObservationMismatch, "refiner changed a frame shape");
            }
        }
    }
    return reconstruct_from(start, offset, cameras, backgrounds, refined, ctx, weights, opt, source, log);
}

}  // namespace fluidrec
