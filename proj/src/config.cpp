// SPDX-License-Identifier: Apache-2.0
#include "fluidrec/config.hpp"

#include "fluidrec/error.hpp"
#include "fluidrec/io.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace fluidrec {

namespace {

struct BadValue {
    std::string why;
};

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        out.push_back(trim(cur));
    }
    if (!s.empty() && s.back() == sep) {
        out.emplace_back();
    }
    return out;
}

Real to_real(const std::string& s)
{
    const auto slash = s.find('/');
    if (slash != std::string::npos) {
        return to_real(trim(s.substr(0, slash))) / to_real(trim(s.substr(slash + 1)));
    }
    std::size_t used = 0;
    Real v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw BadValue{"expected a number, got '" + s + "'"};
    }
    if (used != s.size() || !std::isfinite(v)) {
        throw BadValue{"expected a finite number, got '" + s + "'"};
    }
    return v;
}

long long to_int(const std::string& s)
{
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        throw BadValue{"expected an integer, got '" + s + "'"};
    }
    if (used != s.size()) {
        throw BadValue{"expected an integer, got '" + s + "'"};
    }
    return v;
}

std::uint64_t to_u64(const std::string& s)
{
    std::size_t used = 0;
    unsigned long long v = 0;
    if (s.empty() || s[0] == '-') {
        throw BadValue{"expected an unsigned integer, got '" + s + "'"};
    }
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        throw BadValue{"expected an unsigned integer, got '" + s + "'"};
    }
    if (used != s.size()) {
        throw BadValue{"expected an unsigned integer, got '" + s + "'"};
    }
    return v;
}

bool to_bool(const std::string& s)
{
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw BadValue{"expected true or false, got '" + s + "'"};
}

Vec3 to_vec3(const std::string& s)
{
    const auto parts = split(s, ',');
    if (parts.size() != 3) {
        throw BadValue{"expected x,y,z, got '" + s + "'"};
    }
    return {to_real(parts[0]), to_real(parts[1]), to_real(parts[2])};
}

std::string fmt(Real v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt(const Vec3& v) { return fmt(v.x()) + "," + fmt(v.y()) + "," + fmt(v.z()); }
std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Key {
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
Key real_key(const char* name, T RunConfig::*group, Real T::*field)
{
    return {name, [=](RunConfig& c, const std::string& v) { (c.*group).*field = to_real(v); },
            [=](const RunConfig& c) { return fmt((c.*group).*field); }};
}

template <class T>
Key vec_key(const char* name, T RunConfig::*group, Vec3 T::*field)
{
    return {name, [=](RunConfig& c, const std::string& v) { (c.*group).*field = to_vec3(v); },
            [=](const RunConfig& c) { return fmt((c.*group).*field); }};
}

template <class T>
Key int_key(const char* name, T RunConfig::*group, int T::*field)
{
    return {name, [=](RunConfig& c, const std::string& v) { (c.*group).*field = static_cast<int>(to_int(v)); },
            [=](const RunConfig& c) { return std::to_string((c.*group).*field); }};
}

template <class T>
Key size_key(const char* name, T RunConfig::*group, std::size_t T::*field)
{
    return {name,
            [=](RunConfig& c, const std::string& v) {
                const long long n = to_int(v);
                if (n < 0) throw BadValue{"expected a non-negative count"};
                (c.*group).*field = static_cast<std::size_t>(n);
            },
            [=](const RunConfig& c) { return std::to_string((c.*group).*field); }};
}

Key top_int(const char* name, int RunConfig::*field)
{
    return {name, [=](RunConfig& c, const std::string& v) { c.*field = static_cast<int>(to_int(v)); },
            [=](const RunConfig& c) { return std::to_string(c.*field); }};
}

Key top_string(const char* name, std::string RunConfig::*field)
{
    return {name, [=](RunConfig& c, const std::string& v) { c.*field = v; },
            [=](const RunConfig& c) { return c.*field; }};
}

const std::vector<Key>& keys()
{
    using RC = RunConfig;
    static const std::vector<Key> table = {
        {"preset", [](RC& c, const std::string& v) { apply_preset(c, v); }, [](const RC& c) { return c.preset; }},
        // simulation
        real_key("dt", &RC::fluid, &FluidParams::dt),
        vec_key("gravity", &RC::fluid, &FluidParams::gravity),
        real_key("buoyancy_alpha", &RC::fluid, &FluidParams::buoyancy_alpha),
        real_key("drag_k", &RC::fluid, &FluidParams::drag_k),
        real_key("rest_density", &RC::fluid, &FluidParams::rest_density),
        vec_key("env_velocity", &RC::fluid, &FluidParams::env_velocity),
        int_key("solver_iters", &RC::fluid, &FluidParams::solver_iters),
        real_key("constraint_epsilon", &RC::fluid, &FluidParams::constraint_epsilon),
        {"kernel_radius",
         [](RC& c, const std::string& v) {
             c.kernel_radius_auto = v == "auto";
             if (!c.kernel_radius_auto) c.fluid.kernel.radius = to_real(v);
         },
         [](const RC& c) { return c.kernel_radius_auto ? std::string("auto") : fmt(c.fluid.kernel.radius); }},
        {"kernel_kind",
         [](RC& c, const std::string& v) {
             if (v == "poly6") c.fluid.kernel.kind = KernelKind::Poly6;
             else if (v == "spiky") c.fluid.kernel.kind = KernelKind::Spiky;
             else throw BadValue{"expected poly6 or spiky"};
         },
         [](const RC& c) { return std::string(c.fluid.kernel.kind == KernelKind::Poly6 ? "poly6" : "spiky"); }},
        {"domain_min", [](RC& c, const std::string& v) { c.fluid.domain.lo = to_vec3(v); },
         [](const RC& c) { return fmt(c.fluid.domain.lo); }},
        {"domain_max", [](RC& c, const std::string& v) { c.fluid.domain.hi = to_vec3(v); },
         [](const RC& c) { return fmt(c.fluid.domain.hi); }},
        size_key("max_particles", &RC::fluid, &FluidParams::max_particles),
        top_int("n_stable", &RC::n_stable),
        top_int("frames", &RC::frames),
        // source
        {"source_shape",
         [](RC& c, const std::string& v) {
             if (v == "box") c.source.shape = SourceSpec::Shape::Box;
             else if (v == "sphere") c.source.shape = SourceSpec::Shape::Sphere;
             else throw BadValue{"expected box or sphere"};
         },
         [](const RC& c) { return std::string(c.source.shape == SourceSpec::Shape::Box ? "box" : "sphere"); }},
        {"source_min", [](RC& c, const std::string& v) { c.source.box.lo = to_vec3(v); },
         [](const RC& c) { return fmt(c.source.box.lo); }},
        {"source_max", [](RC& c, const std::string& v) { c.source.box.hi = to_vec3(v); },
         [](const RC& c) { return fmt(c.source.box.hi); }},
        vec_key("source_center", &RC::source, &SourceSpec::center),
        real_key("source_radius", &RC::source, &SourceSpec::radius),
        size_key("seeds_per_step", &RC::source, &SourceSpec::seeds_per_step),
        size_key("visual_seeds_per_step", &RC::source, &SourceSpec::visual_seeds_per_step),
        real_key("seed_jitter", &RC::source, &SourceSpec::seed_jitter),
        vec_key("initial_velocity", &RC::source, &SourceSpec::initial_velocity),
        {"emit_during_rollout", [](RC& c, const std::string& v) { c.source.emit_during_rollout = to_bool(v); },
         [](const RC& c) { return fmt_bool(c.source.emit_during_rollout); }},
        {"visual_color", [](RC& c, const std::string& v) { c.source.visual.color = to_vec3(v); },
         [](const RC& c) { return fmt(c.source.visual.color); }},
        {"visual_scale", [](RC& c, const std::string& v) { c.source.visual.scale = to_vec3(v); },
         [](const RC& c) { return fmt(c.source.visual.scale); }},
        {"visual_opacity", [](RC& c, const std::string& v) { c.source.visual.opacity = to_real(v); },
         [](const RC& c) { return fmt(c.source.visual.opacity); }},
        {"seed", [](RC& c, const std::string& v) { c.seed = to_u64(v); },
         [](const RC& c) { return std::to_string(c.seed); }},
        // losses
        real_key("lambda_sim", &RC::weights, &LossWeights::lambda_sim),
        real_key("lambda_next", &RC::weights, &LossWeights::lambda_next),
        real_key("lambda_v_incomp", &RC::weights, &LossWeights::lambda_v_incomp),
        {"sigma_min_dist",
         [](RC& c, const std::string& v) { c.weights.sigma_min_dist = v == "auto" ? 0.0 : to_real(v); },
         [](const RC& c) {
             return c.weights.sigma_min_dist > 0.0 ? fmt(c.weights.sigma_min_dist) : std::string("auto");
         }},
        {"pair_distance",
         [](RC& c, const std::string& v) {
             if (v == "squared") c.weights.pair_distance = PairDistance::Squared;
             else if (v == "euclidean") c.weights.pair_distance = PairDistance::Euclidean;
             else throw BadValue{"expected squared or euclidean"};
         },
         [](const RC& c) {
             return std::string(c.weights.pair_distance == PairDistance::Squared ? "squared" : "euclidean");
         }},
        {"density_penalty",
         [](RC& c, const std::string& v) {
             if (v == "over_dense") c.weights.density_penalty = DensityPenalty::OverDense;
             else if (v == "two_sided") c.weights.density_penalty = DensityPenalty::TwoSided;
             else throw BadValue{"expected over_dense or two_sided"};
         },
         [](const RC& c) {
             return std::string(c.weights.density_penalty == DensityPenalty::OverDense ? "over_dense" : "two_sided");
         }},
        real_key("lambda_c", &RC::weights, &LossWeights::lambda_c),
        real_key("lambda_s", &RC::weights, &LossWeights::lambda_s),
        real_key("lambda_o", &RC::weights, &LossWeights::lambda_o),
        real_key("lambda_r", &RC::weights, &LossWeights::lambda_r),
        real_key("aniso_max_ratio", &RC::weights, &LossWeights::aniso_max_ratio),
        real_key("visual_weight", &RC::weights, &LossWeights::visual_weight),
        int_key("next_backprop_iters", &RC::weights, &LossWeights::next_backprop_iters),
        // optimizer
        {"optimizer",
         [](RC& c, const std::string& v) {
             if (v == "adam") c.optimizer.method = OptimizerMethod::AdaptiveMoment;
             else if (v == "gd") c.optimizer.method = OptimizerMethod::GradientDescent;
             else throw BadValue{"expected adam or gd"};
         },
         [](const RC& c) {
             return std::string(c.optimizer.method == OptimizerMethod::AdaptiveMoment ? "adam" : "gd");
         }},
        real_key("position_step", &RC::optimizer, &OptimizerConfig::position_step),
        real_key("appearance_step", &RC::optimizer, &OptimizerConfig::appearance_step),
        int_key("iterations_dynamics", &RC::optimizer, &OptimizerConfig::iterations_dynamics),
        int_key("iterations_appearance", &RC::optimizer, &OptimizerConfig::iterations_appearance),
        real_key("gradient_clip", &RC::optimizer, &OptimizerConfig::gradient_clip),
        real_key("adam_beta1", &RC::optimizer, &OptimizerConfig::beta1),
        real_key("adam_beta2", &RC::optimizer, &OptimizerConfig::beta2),
        real_key("adam_epsilon", &RC::optimizer, &OptimizerConfig::epsilon),
        int_key("max_halvings", &RC::optimizer, &OptimizerConfig::max_halvings),
        real_key("min_scale", &RC::optimizer, &OptimizerConfig::min_scale),
        // evaluation grid
        int_key("grid_resolution", &RC::grid, &GridSpec::resolution),
        {"grid_min",
         [](RC& c, const std::string& v) {
             if (v == "auto") {
                 c.grid_bounds_auto = true;
             } else {
                 c.grid_bounds_auto = false;
                 c.grid.bounds.lo = to_vec3(v);
             }
         },
         [](const RC& c) { return c.grid_bounds_auto ? std::string("auto") : fmt(c.grid.bounds.lo); }},
        {"grid_max",
         [](RC& c, const std::string& v) {
             if (v == "auto") {
                 c.grid_bounds_auto = true;
             } else {
                 c.grid_bounds_auto = false;
                 c.grid.bounds.hi = to_vec3(v);
             }
         },
         [](const RC& c) { return c.grid_bounds_auto ? std::string("auto") : fmt(c.grid.bounds.hi); }},
        // cameras
        int_key("camera_count", &RC::rig, &CameraRig::count),
        real_key("camera_radius", &RC::rig, &CameraRig::radius),
        real_key("camera_height", &RC::rig, &CameraRig::height),
        vec_key("camera_target", &RC::rig, &CameraRig::target),
        real_key("camera_view_half_height", &RC::rig, &CameraRig::view_half_height),
        int_key("image_width", &RC::rig, &CameraRig::width),
        int_key("image_height", &RC::rig, &CameraRig::height_px),
        vec_key("background", &RC::rig, &CameraRig::background),
        {"camera_files",
         [](RC& c, const std::string& v) {
             c.camera_files.clear();
             if (v.empty()) return;
             for (const std::string& p : split(v, ',')) {
                 if (p.empty()) throw BadValue{"empty camera path"};
                 c.camera_files.push_back(p);
             }
         },
         [](const RC& c) {
             std::string s;
             for (std::size_t i = 0; i < c.camera_files.size(); ++i) {
                 s += (i ? "," : "") + c.camera_files[i];
             }
             return s;
         }},
        // interaction and prediction
        {"wind",
         [](RC& c, const std::string& v) {
             parse_wind(v);
             c.wind = v;
         },
         [](const RC& c) { return c.wind; }},
        {"rigid",
         [](RC& c, const std::string& v) {
             // Snapshot files are read when the context is built.
             if (trim(v).rfind("snapshot:", 0) != 0) parse_rigid(v, 6);
             c.rigid = v;
         },
         [](const RC& c) { return c.rigid; }},
        top_int("rigid_surface_points", &RC::rigid_surface_points),
        {"refiner",
         [](RC& c, const std::string& v) {
             if (v != "identity" && v != "blur") throw BadValue{"expected identity or blur"};
             c.refiner = v;
         },
         [](const RC& c) { return c.refiner; }},
        {"blur_sigma", [](RC& c, const std::string& v) { c.blur_sigma = to_real(v); },
         [](const RC& c) { return fmt(c.blur_sigma); }},
        top_int("predict_steps", &RC::predict_steps),
    };
    return table;
}

void validate_config(const RunConfig& c)
{
    c.fluid.validate();
    c.source.validate(c.fluid.domain);
    c.weights.validate();
    c.optimizer.validate();
    c.grid.validate();
    if (c.n_stable < 0 || c.frames < 1 || c.predict_steps < 0) {
        throw Error(ErrorCode::ConfigError, "need n_stable >= 0, frames >= 1, predict_steps >= 0");
    }
    if (c.rig.count < 1 || c.rig.width < 1 || c.rig.height_px < 1 || !(c.rig.radius > 0.0) ||
        !(c.rig.view_half_height > 0.0)) {
        throw Error(ErrorCode::ConfigError, "camera rig needs positive count, size, radius, and view height");
    }
    if (!(c.blur_sigma > 0.0) || c.rigid_surface_points < 6) {
        throw Error(ErrorCode::ConfigError, "need blur_sigma > 0 and rigid_surface_points >= 6");
    }
}

}  // namespace

void apply_preset(RunConfig& cfg, const std::string& name)
{
    if (name == "scalarflow") {
        cfg.fluid.buoyancy_alpha = -3.0;
        cfg.fluid.rest_density = 2.0;
    } else if (name == "smoke") {
        cfg.fluid.buoyancy_alpha = -6.0;
        cfg.fluid.rest_density = 1.5;
    } else {
        throw Error(ErrorCode::ConfigError, "unknown preset '" + name + "' (scalarflow or smoke)");
    }
    cfg.preset = name;
}

void resolve_config(RunConfig& cfg)
{
    if (cfg.kernel_radius_auto) {
        cfg.fluid.kernel.radius = default_kernel_radius(cfg.fluid.rest_density);
    }
    if (cfg.grid_bounds_auto) {
        cfg.grid.bounds = cfg.fluid.domain;
    }
    cfg.source.rng_seed = cfg.seed;
}

RunConfig default_config()
{
    RunConfig cfg;
    apply_preset(cfg, cfg.preset);
    resolve_config(cfg);
    return cfg;
}

RunConfig parse_config(const std::string& text, const std::string& origin, std::vector<std::string>* defaulted)
{
    std::map<std::string, std::pair<std::string, int>> entries;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::set<std::string> known;
    for (const Key& k : keys()) {
        known.insert(k.name);
    }
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::ConfigError, origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!known.count(key)) {
            throw Error(ErrorCode::ConfigError, origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        if (entries.count(key)) {
            throw Error(ErrorCode::ConfigError, origin + ":" + std::to_string(lineno) + ": repeated key '" + key + "'");
        }
        entries[key] = {value, lineno};
    }

    RunConfig cfg;
    apply_preset(cfg, cfg.preset);
    // Table order puts the preset first so explicit keys override it.
    for (const Key& k : keys()) {
        const auto it = entries.find(k.name);
        if (it == entries.end()) {
            if (defaulted) defaulted->push_back(k.name);
            continue;
        }
        try {
            k.set(cfg, it->second.first);
        } catch (const BadValue& e) {
            throw Error(ErrorCode::ConfigError,
                        origin + ":" + std::to_string(it->second.second) + ": " + k.name + ": " + e.why);
        } catch (const Error& e) {
            throw Error(ErrorCode::ConfigError,
                        origin + ":" + std::to_string(it->second.second) + ": " + k.name + ": " + e.what());
        }
    }
    resolve_config(cfg);
    try {
        validate_config(cfg);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        throw Error(ErrorCode::ConfigError, origin + ": " + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, std::vector<std::string>* defaulted)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, e.what());
    }
    return parse_config(text, path.string(), defaulted);
}

std::string dump_config(const RunConfig& cfg)
{
    std::string out;
    for (const Key& k : keys()) {
        out += std::string(k.name) + " = " + k.get(cfg) + "\n";
    }
    return out;
}

std::optional<WindSpec> parse_wind(const std::string& spec)
{
    if (trim(spec).empty()) {
        return std::nullopt;
    }
    const auto parts = split(spec, ',');
    if (parts.size() != 5 && parts.size() != 6) {
        throw Error(ErrorCode::ConfigError, "wind expects dx,dy,dz,base,rate[,y_ref]");
    }
    try {
        WindSpec w;
        Vec3 d(to_real(parts[0]), to_real(parts[1]), to_real(parts[2]));
        if (!(d.norm() > 0.0)) {
            throw Error(ErrorCode::ConfigError, "wind direction must be non-zero");
        }
        w.direction = d.normalized();
        w.base_magnitude = to_real(parts[3]);
        w.vertical_rate = to_real(parts[4]);
        w.y_ref = parts.size() == 6 ? to_real(parts[5]) : 0.0;
        w.validate();
        return w;
    } catch (const BadValue& e) {
        throw Error(ErrorCode::ConfigError, "wind: " + e.why);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        throw Error(ErrorCode::ConfigError, std::string("wind: ") + e.what());
    }
}

std::optional<RigidBody> parse_rigid(const std::string& spec, std::size_t surface_points)
{
    const std::string s = trim(spec);
    if (s.empty()) {
        return std::nullopt;
    }
    const auto colon = s.find(':');
    const std::string kind = s.substr(0, colon);
    const std::string rest = colon == std::string::npos ? std::string() : s.substr(colon + 1);
    if (kind == "sphere") {
        const auto parts = split(rest, ',');
        if (parts.size() != 4) {
            throw Error(ErrorCode::ConfigError, "rigid sphere expects sphere:cx,cy,cz,r");
        }
        try {
            const Vec3 c(to_real(parts[0]), to_real(parts[1]), to_real(parts[2]));
            const Real r = to_real(parts[3]);
            if (!(r > 0.0)) {
                throw BadValue{"radius must be positive"};
            }
            return RigidBody::sphere(c, r, surface_points);
        } catch (const BadValue& e) {
            throw Error(ErrorCode::ConfigError, "rigid: " + e.why);
        }
    }
    if (kind == "snapshot") {
        if (rest.empty()) {
            throw Error(ErrorCode::ConfigError, "rigid snapshot expects snapshot:PATH");
        }
        const Snapshot snap = read_snapshot(rest);
        std::vector<Vec3> pts = snap.kind == SnapshotKind::Physical ? snap.physical.positions : snap.visual.positions;
        if (pts.empty()) {
            throw Error(ErrorCode::ConfigError, "rigid snapshot holds no points");
        }
        return RigidBody::from_surface_points(std::move(pts));
    }
    throw Error(ErrorCode::ConfigError, "rigid expects sphere:... or snapshot:...");
}

SimContext make_context(const RunConfig& cfg)
{
    SimContext ctx;
    ctx.params = cfg.fluid;
    if (const auto w = parse_wind(cfg.wind)) {
        ctx.force = ExternalForceField::make_wind(*w);
    }
    ctx.coupling = parse_rigid(cfg.rigid, static_cast<std::size_t>(cfg.rigid_surface_points));
    return ctx;
}

std::vector<Camera> make_cameras(const RunConfig& cfg)
{
    std::vector<Camera> cams;
    if (!cfg.camera_files.empty()) {
        for (const std::string& p : cfg.camera_files) {
            cams.push_back(read_camera(p));
        }
        return cams;
    }
    const CameraRig& rig = cfg.rig;
    const Real focal = 0.5 * rig.height_px * rig.radius / rig.view_half_height;
    for (int c = 0; c < rig.count; ++c) {
        const Real a = 2.0 * std::numbers::pi * c / rig.count;
        const Vec3 eye(rig.target.x() + rig.radius * std::sin(a), rig.height, rig.target.z() + rig.radius * std::cos(a));
        cams.push_back(Camera::look_at(eye, rig.target, Vec3::UnitY(), focal, rig.width, rig.height_px));
    }
    return cams;
}

std::vector<Image> make_backgrounds(const RunConfig& cfg, const std::vector<Camera>& cameras)
{
    std::vector<Image> bgs;
    for (const Camera& cam : cameras) {
        bgs.push_back(Image::flat(cam.width, cam.height, cfg.rig.background));
    }
    return bgs;
}

Refiner make_refiner(const RunConfig& cfg)
{
    return cfg.refiner == "blur" ? temporal_blur_refiner(cfg.blur_sigma) : identity_refiner();
}

}  // namespace fluidrec
