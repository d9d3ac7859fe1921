// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fluidrec/camera.hpp"
#include "fluidrec/engine.hpp"
#include "fluidrec/image.hpp"
#include "fluidrec/interaction.hpp"
#include "fluidrec/losses.hpp"
#include "fluidrec/metrics.hpp"
#include "fluidrec/optimizer.hpp"
#include "fluidrec/pbf.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fluidrec {

/// Cameras evenly spaced on a horizontal circle, all aimed at `target`.
struct CameraRig {
    int count = 3;
    Real radius = 50.0;
    Real height = 16.0;
    Vec3 target = Vec3(0.0, 16.0, 0.0);
    Real view_half_height = 18.0;  // metres visible above/below target at the target distance
    int width = 128;
    int height_px = 128;
    Vec3 background = Vec3::Zero();
};

/// Everything a CLI run needs. Produced by parse_config(); the kernel radius
/// and grid bounds are resolved there when left on "auto".
struct RunConfig {
    std::string preset = "scalarflow";
    FluidParams fluid{};
    bool kernel_radius_auto = true;
    SourceSpec source{};
    int n_stable = 20;
    int frames = 30;
    LossWeights weights{};
    OptimizerConfig optimizer{};
    GridSpec grid{};
    bool grid_bounds_auto = true;
    CameraRig rig{};
    std::vector<std::string> camera_files;
    std::string wind;   // "dx,dy,dz,base,rate[,y_ref]" or empty
    std::string rigid;  // "sphere:cx,cy,cz,r", "snapshot:PATH", or empty
    int rigid_surface_points = 2000;
    std::string refiner = "identity";
    Real blur_sigma = 1.0;
    int predict_steps = 10;
    std::uint64_t seed = 0;
};

/// Named (buoyancy_alpha, rest_density) pairs: "scalarflow" (-3, 2) and
/// "smoke" (-6, 1.5).
void apply_preset(RunConfig& cfg, const std::string& name);

/// Parses `key = value` lines; `#` starts a comment. Unknown keys, repeated
/// keys, and malformed values throw Error(ConfigError). Keys not present are
/// appended to `defaulted`.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>",
                       std::vector<std::string>* defaulted = nullptr);
RunConfig load_config(const std::filesystem::path& path, std::vector<std::string>* defaulted = nullptr);
RunConfig default_config();

/// Every key with its effective value, one per line, in a fixed order.
/// parse_config(dump_config(c)) reproduces c.
std::string dump_config(const RunConfig& cfg);

/// Re-derives the auto kernel radius and grid bounds after edits.
void resolve_config(RunConfig& cfg);

std::optional<WindSpec> parse_wind(const std::string& spec);
std::optional<RigidBody> parse_rigid(const std::string& spec, std::size_t surface_points);

SimContext make_context(const RunConfig& cfg);
std::vector<Camera> make_cameras(const RunConfig& cfg);
std::vector<Image> make_backgrounds(const RunConfig& cfg, const std::vector<Camera>& cameras);
Refiner make_refiner(const RunConfig& cfg);

}  // namespace fluidrec
