// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/cli.hpp"

#include "fluidrec/config.hpp"
#include "fluidrec/engine.hpp"
#include "fluidrec/error.hpp"
#include "fluidrec/io.hpp"
#include "fluidrec/metrics.hpp"
#include "fluidrec/parallel.hpp"
#include "fluidrec/ssim.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>

namespace fluidrec::cli {

namespace {

struct Globals {
    std::string config;
    std::string out = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool quiet = false;
};

struct Context {
    Globals g;
    std::ostream* out;
    std::ostream* err;

    void log(const std::string& msg) const
    {
        if (!g.quiet) {
            *err << "fluidrec: " << msg << "\n";
        }
    }
};

RunConfig load(const Context& ctx)
{
    std::vector<std::string> defaulted;
    RunConfig cfg;
    if (ctx.g.config.empty()) {
        cfg = default_config();
        ctx.log("no --config given; using built-in defaults");
    } else {
        cfg = load_config(ctx.g.config, &defaulted);
        if (!defaulted.empty()) {
            std::string keys;
            for (std::size_t i = 0; i < defaulted.size(); ++i) {
                keys += (i ? ", " : "") + defaulted[i];
            }
            ctx.log(std::to_string(defaulted.size()) + " keys defaulted: " + keys);
        }
    }
    if (ctx.g.seed_set) {
        cfg.seed = ctx.g.seed;
        resolve_config(cfg);
    }
    if (ctx.g.threads > 0) {
        set_thread_count(ctx.g.threads);
    }
    return cfg;
}

std::string fmt(Real v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_effective_config(const fs::path& out, const RunConfig& cfg)
{
    write_file_atomic(out / "config.txt", dump_config(cfg));
}

void write_loss_log(const fs::path& path, const ReconstructionLog& log)
{
    std::string s = "# timestep stage initial final evaluations accepted halvings sim incomp_now incomp_next "
                    "incomp_visual visual_l1 visual_ssim reg aniso\n";
    for (const StageLog& st : log.stages) {
        const LossReport& r = st.report;
        s += std::to_string(st.timestep) + " " + std::to_string(st.stage) + " " + fmt(st.result.initial) + " " +
             fmt(st.result.final) + " " + std::to_string(st.result.evaluations) + " " +
             std::to_string(st.result.accepted) + " " + std::to_string(st.result.halvings) + " " + fmt(r.sim) + " " +
             fmt(r.incomp_now) + " " + fmt(r.incomp_next) + " " + fmt(r.incomp_visual) + " " + fmt(r.visual_l1) +
             " " + fmt(r.visual_ssim) + " " + fmt(r.reg) + " " + fmt(r.aniso) + "\n";
    }
    write_file_atomic(path, s);
}

struct ImageScores {
    Real psnr = 0.0;
    Real ssim = 0.0;
    std::size_t count = 0;
};

ImageScores compare_frames(const FrameSet& a, const FrameSet& b)
{
    if (a.size() != b.size()) {
        throw Error(ErrorCode::ObservationMismatch, "image sets differ in camera count");
    }
    ImageScores s;
    for (std::size_t c = 0; c < a.size(); ++c) {
        if (a[c].size() != b[c].size()) {
            throw Error(ErrorCode::ObservationMismatch, "image sequences differ in length");
        }
        for (std::size_t k = 0; k < a[c].size(); ++k) {
            s.psnr += psnr(a[c][k], b[c][k]);
            s.ssim += ssim(a[c][k], b[c][k]);
            ++s.count;
        }
    }
    if (s.count > 0) {
        s.psnr /= static_cast<Real>(s.count);
        s.ssim /= static_cast<Real>(s.count);
    }
    return s;
}

std::size_t last_particle_count(const FluidTrajectory& t)
{
    return t.size() ? t.physical.back().size() : 0;
}

int cmd_simulate(const Context& ctx, int steps, bool previews)
{
    const RunConfig cfg = load(ctx);
    const fs::path out = ctx.g.out;
    const SimContext sim = make_context(cfg);
    const int n = steps > 0 ? steps : cfg.frames;
    auto [phys, vis] = stabilize(cfg.source, cfg.fluid, cfg.n_stable);
    const auto t0 = std::chrono::steady_clock::now();
    const FluidTrajectory traj = rollout({std::move(phys), std::move(vis)}, cfg.n_stable, sim, cfg.source, n);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_trajectory(out / "trajectory", traj);
    const std::vector<Camera> cams = make_cameras(cfg);
    write_frames(out / "renders", render_frames(traj, cams, make_backgrounds(cfg, cams)), 1, previews);
    write_effective_config(out, cfg);
    ctx.log("simulated " + std::to_string(n) + " steps, " + std::to_string(last_particle_count(traj)) +
            " physical particles, " + fmt(secs) + " s");
    return kOk;
}

int cmd_synth(const Context& ctx, bool previews)
{
    const RunConfig cfg = load(ctx);
    const fs::path out = ctx.g.out;
    const SimContext sim = make_context(cfg);
    auto [phys, vis] = stabilize(cfg.source, cfg.fluid, cfg.n_stable);
    const FluidTrajectory gt = rollout({std::move(phys), std::move(vis)}, cfg.n_stable, sim, cfg.source, cfg.frames);
    SceneObservation obs;
    obs.cameras = make_cameras(cfg);
    obs.backgrounds = make_backgrounds(cfg, obs.cameras);
    obs.frames = render_frames(gt, obs.cameras, obs.backgrounds);
    write_observation(out / "observation", obs);
    if (previews) {
        write_frames(out / "previews", obs.frames, 1, true);
    }
    write_trajectory(out / "ground_truth", gt);
    write_effective_config(out, cfg);
    ctx.log("wrote " + std::to_string(obs.cameras.size()) + " views x " + std::to_string(obs.frame_count()) +
            " frames, " + std::to_string(last_particle_count(gt)) + " physical particles");
    return kOk;
}

int cmd_reconstruct(const Context& ctx, const std::string& obs_dir, bool previews)
{
    const RunConfig cfg = load(ctx);
    const fs::path out = ctx.g.out;
    const SceneObservation obs = read_observation(obs_dir);
    ReconstructionLog log;
    const auto t0 = std::chrono::steady_clock::now();
    const FluidTrajectory traj =
        reconstruct(obs, cfg.fluid, cfg.weights, cfg.optimizer, cfg.source, cfg.n_stable, &log);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_trajectory(out / "trajectory", traj);
    const FrameSet renders = render_frames(traj, obs.cameras, obs.backgrounds);
    write_frames(out / "renders", renders, 1, previews);
    write_loss_log(out / "loss_log.txt", log);
    const ImageScores sc = compare_frames(renders, obs.frames);
    const Real div = evaluate_divergence(traj, cfg.grid, cfg.fluid);
    write_metrics(out, {{"psnr_mean", sc.psnr},
                        {"ssim_mean", sc.ssim},
                        {"divergence_mean", div},
                        {"frames", static_cast<Real>(obs.frame_count())},
                        {"physical_particles", static_cast<Real>(last_particle_count(traj))},
                        {"seconds", secs}});
    write_effective_config(out, cfg);
    ctx.log("reconstructed " + std::to_string(obs.frame_count()) + " frames: PSNR " + fmt(sc.psnr) +
            " dB, SSIM " + fmt(sc.ssim) + ", divergence " + fmt(div) + ", " + fmt(secs) + " s");
    return kOk;
}

int cmd_resimulate(const Context& ctx, const std::string& traj_dir, const std::string& obs_dir, bool previews)
{
    const RunConfig cfg = load(ctx);
    const fs::path out = ctx.g.out;
    const FluidTrajectory traj = read_trajectory(traj_dir);
    const FluidTrajectory resim = resimulate(traj, cfg.fluid);
    write_trajectory(out / "trajectory", resim);
    std::vector<Camera> cams;
    std::vector<Image> bgs;
    if (!obs_dir.empty()) {
        const SceneObservation obs = read_observation(obs_dir);
        cams = obs.cameras;
        bgs = obs.backgrounds;
    } else {
        cams = make_cameras(cfg);
        bgs = make_backgrounds(cfg, cams);
    }
    const FrameSet renders = render_frames(resim, cams, bgs);
    write_frames(out / "renders", renders, 1, previews);
    const ImageScores sc = compare_frames(renders, render_frames(traj, cams, bgs));
    write_metrics(out, {{"psnr_vs_input", sc.psnr},
                        {"ssim_vs_input", sc.ssim},
                        {"divergence_mean", evaluate_divergence(resim, cfg.grid, cfg.fluid)}});
    write_effective_config(out, cfg);
    ctx.log("re-simulated " + std::to_string(resim.size() ? resim.size() - 1 : 0) + " steps: PSNR vs input " +
            fmt(sc.psnr) + " dB");
    return kOk;
}

struct PredictArgs {
    std::string trajectory;
    std::string refiner;
    int t_target = 0;
    std::string wind;
    std::string rigid;
    bool previews = false;
};

int cmd_predict(const Context& ctx, const PredictArgs& a, bool require_interaction)
{
    RunConfig cfg = load(ctx);
    if (!a.refiner.empty()) {
        if (a.refiner != "identity" && a.refiner != "blur") {
            throw Error(ErrorCode::ConfigError, "--refiner expects identity or blur");
        }
        cfg.refiner = a.refiner;
    }
    if (!a.wind.empty()) {
        parse_wind(a.wind);
        cfg.wind = a.wind;
    }
    if (!a.rigid.empty()) {
        cfg.rigid = a.rigid;
    }
    if (require_interaction && cfg.wind.empty() && cfg.rigid.empty()) {
        throw Error(ErrorCode::ConfigError, "interact needs --wind and/or --rigid (or the config keys)");
    }
    const fs::path out = ctx.g.out;
    const FluidTrajectory traj = read_trajectory(a.trajectory);
    if (traj.size() == 0) {
        throw Error(ErrorCode::IoError, "empty trajectory");
    }
    const SimContext sim = make_context(cfg);
    PredictionOptions opts;
    const int last = static_cast<int>(traj.size()) - 1;
    opts.t_target = a.t_target > 0 ? a.t_target : last + cfg.predict_steps;
    opts.force = sim.force;
    opts.coupling = sim.coupling;
    const std::vector<Camera> cams = make_cameras(cfg);
    const std::vector<Image> bgs = make_backgrounds(cfg, cams);
    ReconstructionLog log;
    const FluidTrajectory pred = predict(traj, cfg.fluid, cfg.weights, cfg.optimizer, cams, bgs, make_refiner(cfg),
                                         cfg.source, opts, &log);
    write_trajectory(out / "trajectory", pred);
    write_frames(out / "renders", render_frames(pred, cams, bgs), last + 1, a.previews);
    write_loss_log(out / "loss_log.txt", log);
    std::size_t inside = 0;
    if (sim.coupling) {
        for (std::size_t k = 1; k < pred.size(); ++k) {
            for (const Vec3& p : pred.physical[k].positions) {
                inside += sim.coupling->inside(p) ? 1 : 0;
            }
        }
    }
    write_metrics(out, {{"t_target", static_cast<Real>(opts.t_target)},
                        {"physical_particles", static_cast<Real>(last_particle_count(pred))},
                        {"particles_inside_rigid", static_cast<Real>(inside)},
                        {"divergence_mean", evaluate_divergence(pred, cfg.grid, cfg.fluid)}});
    write_effective_config(out, cfg);
    ctx.log("predicted timesteps " + std::to_string(last + 1) + ".." + std::to_string(opts.t_target));
    return kOk;
}

int cmd_evaluate(const Context& ctx, const std::string& traj_dir, const std::string& images,
                 const std::string& reference)
{
    const RunConfig cfg = load(ctx);
    if (traj_dir.empty() && (images.empty() || reference.empty())) {
        throw CLI::ValidationError("evaluate", "needs --trajectory and/or --images with --reference");
    }
    std::vector<MetricRecord> records;
    if (!images.empty() || !reference.empty()) {
        if (images.empty() || reference.empty()) {
            throw CLI::ValidationError("evaluate", "--images and --reference go together");
        }
        const ImageScores sc = compare_frames(read_frames(images), read_frames(reference));
        records.push_back({"psnr_mean", sc.psnr});
        records.push_back({"ssim_mean", sc.ssim});
        records.push_back({"images", static_cast<Real>(sc.count)});
    }
    if (!traj_dir.empty()) {
        std::vector<Real> per;
        const FluidTrajectory traj = read_trajectory(traj_dir);
        records.push_back({"divergence_mean", evaluate_divergence(traj, cfg.grid, cfg.fluid, &per)});
        records.push_back({"divergence_timesteps", static_cast<Real>(per.size())});
    }
    write_metrics(ctx.g.out, records);
    for (const MetricRecord& r : records) {
        *ctx.out << r.name << " = " << fmt(r.value) << "\n";
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Differentiable particle fluid simulation and multi-view reconstruction"};
    app.require_subcommand(1);
    app.fallthrough();
    Context ctx{{}, &out, &err};
    Globals& g = ctx.g;
    app.add_option("--config", g.config, "run configuration file (key = value)");
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", g.seed, "source seeding RNG seed (overrides the config)");
    app.add_option("--threads", g.threads, "worker threads (results do not depend on this)")
        ->check(CLI::NonNegativeNumber);
    app.add_flag("--quiet", g.quiet, "suppress progress messages");

    int steps = 0;
    bool previews = false;
    std::string obs_dir, traj_dir, images, reference;
    PredictArgs pa;

    auto* sim = app.add_subcommand("simulate", "forward rollout from the source; snapshots and renders");
    sim->add_option("--steps", steps, "timesteps after stabilization (default: frames)");
    sim->add_flag("--previews", previews, "also write 8-bit previews");

    auto* synth = app.add_subcommand("synth-dataset", "ground-truth plume and its multi-view observation");
    synth->add_flag("--previews", previews, "also write 8-bit previews");

    auto* rec = app.add_subcommand("reconstruct", "two-stage reconstruction against an observation directory");
    rec->add_option("--observation", obs_dir, "observation directory")->required();
    rec->add_flag("--previews", previews, "also write 8-bit previews");

    auto* resim = app.add_subcommand("resimulate", "replay reconstructed fields from the initial state");
    resim->add_option("--trajectory", traj_dir, "trajectory directory")->required();
    resim->add_option("--observation", obs_dir, "render with this observation's cameras");
    resim->add_flag("--previews", previews, "also write 8-bit previews");

    auto add_predict_opts = [&](CLI::App* sc) {
        sc->add_option("--trajectory", pa.trajectory, "trajectory directory to continue")->required();
        sc->add_option("--refiner", pa.refiner, "identity or blur");
        sc->add_option("--t-target", pa.t_target, "last predicted timestep (default: last + predict_steps)");
        sc->add_option("--wind", pa.wind, "dx,dy,dz,base,rate[,y_ref]");
        sc->add_option("--rigid", pa.rigid, "sphere:cx,cy,cz,r or snapshot:PATH");
        sc->add_flag("--previews", pa.previews, "also write 8-bit previews");
    };
    auto* pred = app.add_subcommand("predict", "rollout, render, refine, and reconstruct future timesteps");
    add_predict_opts(pred);
    auto* inter = app.add_subcommand("interact", "prediction with wind and/or a rigid obstacle");
    add_predict_opts(inter);

    auto* eval = app.add_subcommand("evaluate", "divergence, PSNR, and SSIM reports");
    eval->add_option("--trajectory", traj_dir, "trajectory directory (divergence)");
    eval->add_option("--images", images, "frame directory (cam_CC/frame_NNNN.pfm)");
    eval->add_option("--reference", reference, "reference frame directory");

    auto* dump = app.add_subcommand("dump-config", "print the effective configuration");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "fluidrec: " << e.what() << "\n" << "run with --help for usage\n";
        return kUsage;
    }
    g.seed_set = seed_opt->count() > 0;

    try {
        if (sim->parsed()) return cmd_simulate(ctx, steps, previews);
        if (synth->parsed()) return cmd_synth(ctx, previews);
        if (rec->parsed()) return cmd_reconstruct(ctx, obs_dir, previews);
        if (resim->parsed()) return cmd_resimulate(ctx, traj_dir, obs_dir, previews);
        if (pred->parsed()) return cmd_predict(ctx, pa, false);
        if (inter->parsed()) return cmd_predict(ctx, pa, true);
        if (eval->parsed()) return cmd_evaluate(ctx, traj_dir, images, reference);
        if (dump->parsed()) {
            out << dump_config(load(ctx));
            return kOk;
        }
    } catch (const CLI::ValidationError& e) {
        err << "fluidrec: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        err << "fluidrec: " << e.what() << "\n";
        return e.code() == ErrorCode::ConfigError ? kConfig : kRuntime;
    } catch (const std::exception& e) {
        err << "fluidrec: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace fluidrec::cli
